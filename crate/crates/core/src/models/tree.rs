//! CART regression trees grown greedily on squared error.
//!
//! Split gain uses the regularized score `G^2 / (n + lambda)` per side
//! (`G` = target sum). With `lambda = 0` this is exactly the reduction in
//! sum of squared errors and leaves predict their mean; boosting passes a
//! positive `lambda` to shrink leaf values towards zero.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::FlatData;

/// Relative gain below which a node is not split.
const GAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Fraction of features considered at each split, in (0, 1].
    pub max_features: f64,
    pub leaf_l2: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: 1.0,
            leaf_l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Arena; the root is `nodes[0]`.
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Splits in pre-order, as `(feature, threshold)`.
    pub fn split_sequence(&self) -> Vec<(usize, f64)> {
        fn walk(nodes: &[Node], at: usize, out: &mut Vec<(usize, f64)>) {
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = &nodes[at]
            {
                out.push((*feature, *threshold));
                walk(nodes, *left, out);
                walk(nodes, *right, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.nodes, 0, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a, R> {
    data: &'a FlatData,
    targets: &'a [f64],
    params: &'a TreeParams,
    n_candidates: usize,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, R> {
    fn leaf(&self, idx: &[usize]) -> Node {
        let sum: f64 = idx.iter().map(|&i| self.targets[i]).sum();
        Node::Leaf {
            value: sum / (idx.len() as f64 + self.params.leaf_l2),
            samples: idx.len(),
        }
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: 0.0,
            samples: 0,
        });
        let can_split = self.params.max_depth.map_or(true, |d| depth < d)
            && idx.len() >= 2 * self.params.min_samples_leaf.max(1);
        let best = if can_split { self.best_split(&idx) } else { None };
        match best {
            None => self.nodes[at] = self.leaf(&idx),
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx
                    .iter()
                    .partition(|&&i| self.data.row(i)[s.feature] <= s.threshold);
                let left = self.build(l, depth + 1);
                let right = self.build(r, depth + 1);
                self.nodes[at] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right,
                };
            }
        }
        at
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<BestSplit> {
        let n = idx.len();
        let mean = idx.iter().map(|&i| self.targets[i]).sum::<f64>() / n as f64;
        let node_sse: f64 = idx.iter().map(|&i| (self.targets[i] - mean).powi(2)).sum();
        if node_sse <= 0.0 {
            return None;
        }
        let lambda = self.params.leaf_l2;
        let min_leaf = self.params.min_samples_leaf.max(1);
        let nf = self.data.n_features;
        let mut features: Vec<usize> = if self.n_candidates >= nf {
            (0..nf).collect()
        } else {
            sample(self.rng, nf, self.n_candidates).into_vec()
        };
        features.sort_unstable();

        let total = n as f64 * mean;
        let score = |g: f64, m: f64| g * g / (m + lambda);
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();
        for f in features {
            order.sort_by(|&a, &b| self.data.row(a)[f].total_cmp(&self.data.row(b)[f]));
            // Centered prefix sums keep the λ = 0 gain free of cancellation.
            let mut centered_left = 0.0;
            for k in 1..n {
                centered_left += self.targets[order[k - 1]] - mean;
                let lo = self.data.row(order[k - 1])[f];
                let hi = self.data.row(order[k])[f];
                if lo >= hi || k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let (nl, nr) = (k as f64, (n - k) as f64);
                let gain = if lambda == 0.0 {
                    centered_left * centered_left / nl + centered_left * centered_left / nr
                } else {
                    let gl = centered_left + nl * mean;
                    score(gl, nl) + score(total - gl, nr) - score(total, n as f64)
                };
                if gain > GAIN_TOL * node_sse && best.map_or(true, |b| gain > b.gain) {
                    let mid = 0.5 * (lo + hi);
                    best = Some(BestSplit {
                        feature: f,
                        threshold: if mid < hi { mid } else { lo },
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Grows one tree on the rows listed in `indices` (repeats allowed).
pub fn fit_tree<R: Rng>(
    data: &FlatData,
    targets: &[f64],
    indices: Vec<usize>,
    params: &TreeParams,
    rng: &mut R,
) -> RegressionTree {
    let nf = data.n_features;
    let n_candidates = ((params.max_features * nf as f64).ceil() as usize).clamp(1, nf.max(1));
    let mut builder = Builder {
        data,
        targets,
        params,
        n_candidates,
        rng,
        nodes: Vec::new(),
    };
    if indices.is_empty() {
        return RegressionTree {
            nodes: vec![Node::Leaf {
                value: 0.0,
                samples: 0,
            }],
        };
    }
    builder.build(indices, 0);
    RegressionTree {
        nodes: builder.nodes,
    }
}
