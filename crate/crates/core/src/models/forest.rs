use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, RegressionTree, TreeParams};
use super::FlatData;
use crate::error::{Error, Result};
use crate::hashing::substream_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_features: f64,
    #[serde(with = "crate::optional")]
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            bootstrap: true,
            max_features: 0.5,
            max_depth: None,
            min_samples_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub seed: u64,
    pub trees: Vec<RegressionTree>,
}

impl ForestModel {
    /// Unweighted mean of the tree predictions.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Trees are grown in parallel, each from its own seed substream, and kept
/// in index order, so the result does not depend on scheduling.
pub fn fit_random_forest(data: &FlatData, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    if params.n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
    }
    if !(params.max_features > 0.0 && params.max_features <= 1.0) {
        return Err(Error::InvalidConfig("max_features must be in (0, 1]".into()));
    }
    if data.is_empty() {
        return Err(Error::Empty("training rows"));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: params.max_features,
        leaf_l2: 0.0,
    };
    let n = data.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, &format!("tree-{t}")));
            let indices: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree(data, &data.y, indices, &tree_params, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        params: *params,
        seed,
        trees,
    })
}
