//! Finite-difference verification of the BPTT gradients.

use rand_chacha::ChaCha8Rng;

use super::net::{backward, forward, ForwardCache, Mode};
use super::LstmModel;
use crate::error::Result;

pub const FD_STEP: f64 = 1e-5;
/// Analytic and numeric values both below this count as agreeing.
pub const ZERO_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockError {
    pub name: String,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub blocks: Vec<BlockError>,
}

fn loss(model: &LstmModel, params: &[f64], sample: &[f64], target: f64, cache: &mut ForwardCache) -> Result<f64> {
    let p = forward::<ChaCha8Rng>(&model.layout, params, sample, Mode::Infer, 0.0, None, cache)?;
    Ok((p - target).powi(2))
}

/// Gradient of the squared error `(pred - target)^2` w.r.t. every parameter.
pub fn analytic_gradient(model: &LstmModel, sample: &[f64], target: f64) -> Result<Vec<f64>> {
    model.check_sample(sample)?;
    let mut cache = ForwardCache::default();
    let pred = forward::<ChaCha8Rng>(&model.layout, &model.params, sample, Mode::Infer, 0.0, None, &mut cache)?;
    let mut grads = vec![0.0; model.layout.total];
    backward(&model.layout, &model.params, &cache, 2.0 * (pred - target), &mut grads);
    Ok(grads)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    if analytic.abs() < ZERO_FLOOR && numeric.abs() < ZERO_FLOOR {
        0.0
    } else {
        (analytic - numeric).abs() / analytic.abs().max(numeric.abs())
    }
}

/// Compares the analytic gradient with central differences on every
/// parameter, with dropout disabled.
pub fn gradient_check(model: &LstmModel, sample: &[f64], target: f64, tolerance: f64) -> Result<GradCheckReport> {
    let analytic = analytic_gradient(model, sample, target)?;
    gradient_check_with(model, sample, target, tolerance, &analytic)
}

/// Same as [`gradient_check`] against a caller-supplied analytic gradient.
pub fn gradient_check_with(
    model: &LstmModel,
    sample: &[f64],
    target: f64,
    tolerance: f64,
    analytic: &[f64],
) -> Result<GradCheckReport> {
    model.check_sample(sample)?;
    let mut params = model.params.clone();
    let mut cache = ForwardCache::default();
    let mut blocks = Vec::new();
    let mut max_rel = 0.0f64;
    for block in model.layout.blocks() {
        let mut block_max = 0.0f64;
        for k in block.range.clone() {
            let orig = params[k];
            params[k] = orig + FD_STEP;
            let up = loss(model, &params, sample, target, &mut cache)?;
            params[k] = orig - FD_STEP;
            let down = loss(model, &params, sample, target, &mut cache)?;
            params[k] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            block_max = block_max.max(relative_error(analytic[k], numeric));
        }
        max_rel = max_rel.max(block_max);
        blocks.push(BlockError {
            name: block.name,
            max_rel_error: block_max,
        });
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        tolerance,
        passed: max_rel < tolerance,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::lstm::LstmConfig;
    use rand::{Rng, SeedableRng};

    fn model(hidden: usize, w: usize, f: usize, layers: usize, seed: u64) -> LstmModel {
        let cfg = LstmConfig {
            hidden_size: hidden,
            window_length: w,
            layers,
            dropout: 0.0,
            ..LstmConfig::default()
        };
        LstmModel::init(cfg, f, seed).unwrap()
    }

    fn sample(seed: u64, len: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn tiny_network_passes() {
        let m = model(3, 4, 2, 1, 1);
        let r = gradient_check(&m, &sample(2, 8), 0.3, 1e-4).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.blocks.len(), 10);
    }

    #[test]
    fn stacked_network_passes() {
        let m = model(3, 3, 2, 2, 4);
        let r = gradient_check(&m, &sample(5, 6), -0.4, 1e-4).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn zero_zero_counts_as_agreement() {
        assert_eq!(relative_error(1e-12, -3e-11), 0.0);
        // An all-zero input and zero recurrent weights make the input
        // weights' gradient vanish exactly.
        let mut m = model(2, 3, 2, 1, 0);
        let l = m.layout.layers[0];
        m.params[l.w..l.b].iter_mut().for_each(|p| *p = 0.0);
        let g = analytic_gradient(&m, &[0.0; 6], 1.0).unwrap();
        let r = gradient_check_with(&m, &[0.0; 6], 1.0, 1e-4, &g).unwrap();
        assert!(r.passed);
        let w_input = r.blocks.iter().find(|b| b.name == "layer0.w_input").unwrap();
        assert_eq!(w_input.max_rel_error, 0.0);
    }

    #[test]
    fn corrupted_forget_gradient_fails() {
        let m = model(3, 4, 2, 1, 9);
        let x = sample(10, 8);
        let mut g = analytic_gradient(&m, &x, 0.5).unwrap();
        let forget = m
            .layout
            .blocks()
            .into_iter()
            .find(|b| b.name == "layer0.w_forget")
            .unwrap();
        for k in forget.range {
            g[k] *= 2.0;
        }
        let r = gradient_check_with(&m, &x, 0.5, 1e-4, &g).unwrap();
        assert!(!r.passed);
        let worst = r.blocks.iter().find(|b| b.name == "layer0.w_forget").unwrap();
        assert!(worst.max_rel_error > 0.4);
    }
}
