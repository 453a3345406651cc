use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FlatData;
use crate::error::{Error, Result};

/// Ridge penalty on the weights; the intercept is never penalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearParams {
    pub ridge_lambda: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams { ridge_lambda: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub ridge_lambda: f64,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

/// Smallest eigenvalue ratio of the Gram matrix treated as non-singular.
const RCOND_FLOOR: f64 = 1e-13;

/// Minimizes `sum (y - Xw - b)^2 + lambda * |w|^2` through the normal
/// equations on mean-centered data.
pub fn fit_ols(data: &FlatData, ridge_lambda: f64) -> Result<LinearModel> {
    if !(ridge_lambda >= 0.0) {
        return Err(Error::InvalidConfig("ridge_lambda must be >= 0".into()));
    }
    let n = data.len();
    let p = data.n_features;
    if n == 0 {
        return Err(Error::Empty("training rows"));
    }
    let x_mean: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| data.row(i)[j]).sum::<f64>() / n as f64)
        .collect();
    let y_mean = data.y.iter().sum::<f64>() / n as f64;
    if p == 0 {
        return Ok(LinearModel {
            weights: vec![],
            intercept: y_mean,
            ridge_lambda,
        });
    }
    let xc = DMatrix::from_fn(n, p, |i, j| data.row(i)[j] - x_mean[j]);
    let yc = DVector::from_iterator(n, data.y.iter().map(|y| y - y_mean));
    let mut gram = xc.transpose() * &xc;
    for j in 0..p {
        gram[(j, j)] += ridge_lambda;
    }
    let rhs = xc.transpose() * yc;

    let eig = gram.clone().symmetric_eigen();
    let max_ev = eig.eigenvalues.max();
    let min_ev = eig.eigenvalues.min();
    if !(max_ev > 0.0) || min_ev <= RCOND_FLOOR * max_ev {
        return Err(Error::Singular(format!(
            "normal equations are rank deficient (eigenvalues {min_ev:e}..{max_ev:e}); use a positive ridge_lambda"
        )));
    }
    let w = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("normal equations are not positive definite; use a positive ridge_lambda".into()))?
        .solve(&rhs);
    let weights: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel {
        weights,
        intercept,
        ridge_lambda,
    })
}
