//! Squared-loss gradient boosting with shrinkage and L2-regularized leaves.
//!
//! Each round fits a depth-limited tree to the current residuals; a leaf's
//! value is `sum(residuals) / (count + l2_leaf_lambda)`. For squared loss the
//! hessian is constant, so this is the second-order leaf weight up to how
//! lambda is scaled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, RegressionTree, TreeParams};
use super::FlatData;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    #[serde(with = "crate::optional")]
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub l2_leaf_lambda: f64,
    /// Keep only the rounds up to the best validation MSE.
    pub select_on_validation: bool,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_rounds: 200,
            learning_rate: 0.1,
            max_depth: Some(3),
            min_samples_leaf: 1,
            l2_leaf_lambda: 1.0,
            select_on_validation: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub params: BoostParams,
    pub base_prediction: f64,
    pub trees: Vec<RegressionTree>,
    /// Number of leading rounds used for prediction.
    pub best_round: usize,
    pub train_mse: Vec<f64>,
    pub val_mse: Vec<f64>,
}

impl BoostedModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_rounds(row, self.best_round)
    }

    pub fn predict_rounds(&self, row: &[f64], rounds: usize) -> f64 {
        self.base_prediction
            + self.params.learning_rate
                * self.trees[..rounds].iter().map(|t| t.predict_row(row)).sum::<f64>()
    }
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64
}

pub fn fit_gradient_boost(
    train: &FlatData,
    val: Option<&FlatData>,
    params: &BoostParams,
) -> Result<BoostedModel> {
    if params.n_rounds == 0 {
        return Err(Error::InvalidConfig("n_rounds must be >= 1".into()));
    }
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(Error::InvalidConfig("learning_rate must be in (0, 1]".into()));
    }
    if !(params.l2_leaf_lambda >= 0.0) {
        return Err(Error::InvalidConfig("l2_leaf_lambda must be >= 0".into()));
    }
    if train.is_empty() {
        return Err(Error::Empty("training rows"));
    }
    let val = match val {
        Some(v) if v.is_empty() && params.select_on_validation => {
            return Err(Error::Empty("validation rows"))
        }
        None if params.select_on_validation => return Err(Error::Empty("validation rows")),
        other => other,
    };

    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: 1.0,
        leaf_l2: params.l2_leaf_lambda,
    };
    // Every feature is considered at every split, so the rng is never drawn.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let base = train.y.iter().sum::<f64>() / train.len() as f64;
    let mut train_pred = vec![base; train.len()];
    let mut val_pred = val.map(|v| vec![base; v.len()]);
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut train_hist = Vec::with_capacity(params.n_rounds);
    let mut val_hist = Vec::new();
    let all: Vec<usize> = (0..train.len()).collect();

    for _ in 0..params.n_rounds {
        let residuals: Vec<f64> = train.y.iter().zip(&train_pred).map(|(y, p)| y - p).collect();
        let tree = fit_tree(train, &residuals, all.clone(), &tree_params, &mut rng);
        for (i, p) in train_pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.predict_row(train.row(i));
        }
        train_hist.push(mse(&train_pred, &train.y));
        if let (Some(v), Some(vp)) = (val, val_pred.as_mut()) {
            for (i, p) in vp.iter_mut().enumerate() {
                *p += params.learning_rate * tree.predict_row(v.row(i));
            }
            val_hist.push(mse(vp, &v.y));
        }
        trees.push(tree);
    }

    let best_round = if params.select_on_validation && !val_hist.is_empty() {
        // First minimum wins ties.
        let mut best = 0;
        for (i, &m) in val_hist.iter().enumerate() {
            if m < val_hist[best] {
                best = i;
            }
        }
        best + 1
    } else {
        trees.len()
    };
    Ok(BoostedModel {
        params: *params,
        base_prediction: base,
        trees,
        best_round,
        train_mse: train_hist,
        val_mse: val_hist,
    })
}
