//! Stacked LSTM regressor trained with minibatch BPTT and Adam.

pub mod gradcheck;
pub mod net;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use self::net::{backward, forward, ForwardCache, Layout, Mode};
use super::adam::Adam;
use crate::dataset::WindowedDataset;
use crate::error::{Error, Result};
use crate::hashing::substream_seed;

pub use gradcheck::{analytic_gradient, gradient_check, gradient_check_with, BlockError, GradCheckReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmConfig {
    pub layers: usize,
    pub hidden_size: usize,
    pub window_length: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub patience: usize,
    pub shuffle: bool,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            layers: 1,
            hidden_size: 32,
            window_length: 10,
            dropout: 0.2,
            epochs: 25,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            patience: 5,
            shuffle: true,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("lstm: {m}")));
        if self.layers == 0 {
            return bad("layers must be >= 1");
        }
        if self.hidden_size == 0 {
            return bad("hidden_size must be >= 1");
        }
        if self.window_length == 0 {
            return bad("window_length must be >= 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and >= 0");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("adam betas must be in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be > 0");
        }
        if self.patience == 0 {
            return bad("patience must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "LstmRepr", try_from = "LstmRepr")]
pub struct LstmModel {
    pub config: LstmConfig,
    pub seed: u64,
    pub layout: Layout,
    pub params: Vec<f64>,
    pub loss_history: Vec<EpochLoss>,
    /// 1-based epoch whose parameters were kept; 0 for an untrained model.
    pub best_epoch: usize,
}

impl LstmModel {
    /// Fresh network: weights uniform in `(-1/sqrt(H), 1/sqrt(H))`, biases
    /// zero except the forget gate, which starts at 1.
    pub fn init(config: LstmConfig, n_inputs: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if n_inputs == 0 {
            return Err(Error::InvalidConfig("lstm: input width must be >= 1".into()));
        }
        let layout = Layout::new(n_inputs, config.hidden_size, config.layers);
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, "lstm-init"));
        let bound = 1.0 / (config.hidden_size as f64).sqrt();
        let h = config.hidden_size;
        let mut params = vec![0.0; layout.total];
        for layer in &layout.layers {
            for p in &mut params[layer.w..layer.b] {
                *p = rng.gen_range(-bound..bound);
            }
            for p in &mut params[layer.b + h..layer.b + 2 * h] {
                *p = 1.0;
            }
        }
        for p in &mut params[layout.head_w..layout.head_w + h] {
            *p = rng.gen_range(-bound..bound);
        }
        Ok(LstmModel {
            config,
            seed,
            layout,
            params,
            loss_history: Vec::new(),
            best_epoch: 0,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.layout.n_inputs
    }

    pub fn window_length(&self) -> usize {
        self.config.window_length
    }

    pub fn predict_sample(&self, sample: &[f64]) -> Result<f64> {
        self.check_sample(sample)?;
        let mut cache = ForwardCache::default();
        forward::<ChaCha8Rng>(&self.layout, &self.params, sample, Mode::Infer, 0.0, None, &mut cache)
    }

    pub fn predict(&self, data: &WindowedDataset) -> Result<Vec<f64>> {
        self.check_dataset(data)?;
        let mut cache = ForwardCache::default();
        (0..data.len())
            .map(|i| {
                forward::<ChaCha8Rng>(&self.layout, &self.params, data.sample(i), Mode::Infer, 0.0, None, &mut cache)
            })
            .collect()
    }

    /// One forward pass in the given mode, exposing the dropout rng.
    pub fn forward<R: Rng>(&self, sample: &[f64], mode: Mode, rng: Option<&mut R>) -> Result<f64> {
        self.check_sample(sample)?;
        let mut cache = ForwardCache::default();
        forward(&self.layout, &self.params, sample, mode, self.config.dropout, rng, &mut cache)
    }

    fn check_sample(&self, sample: &[f64]) -> Result<()> {
        let want = self.config.window_length * self.layout.n_inputs;
        if sample.len() != want {
            return Err(Error::SchemaMismatch(format!(
                "lstm expects {} x {} inputs per sample, got {} values",
                self.config.window_length,
                self.layout.n_inputs,
                sample.len()
            )));
        }
        Ok(())
    }

    fn check_dataset(&self, data: &WindowedDataset) -> Result<()> {
        if data.window_length != self.config.window_length || data.n_inputs() != self.layout.n_inputs {
            return Err(Error::SchemaMismatch(format!(
                "lstm expects windows of {} x {}, got {} x {}",
                self.config.window_length,
                self.layout.n_inputs,
                data.window_length,
                data.n_inputs()
            )));
        }
        Ok(())
    }

    fn mse_on(&self, data: &WindowedDataset) -> Result<f64> {
        let pred = self.predict(data)?;
        Ok(pred.iter().zip(&data.targets).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / data.len() as f64)
    }
}

/// Trains an LSTM on `train`, tracking `val` for early stopping.
///
/// The parameters of the epoch with the lowest validation MSE are returned;
/// training stops after `patience` epochs without improvement or at the
/// epoch cap.
pub fn lstm_train(train: &WindowedDataset, val: &WindowedDataset, config: &LstmConfig, seed: u64) -> Result<LstmModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training windows"));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation windows"));
    }
    let mut model = LstmModel::init(*config, train.n_inputs(), seed)?;
    model.check_dataset(train)?;
    model.check_dataset(val)?;

    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, "lstm-train"));
    let mut adam = Adam::new(
        model.layout.total,
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.adam_epsilon,
    );
    let mut grads = vec![0.0; model.layout.total];
    let mut cache = ForwardCache::default();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history: Vec<EpochLoss> = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut stale = 0;

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 2.0 / batch.len() as f64;
            for &i in batch {
                let pred = forward(
                    &model.layout,
                    &model.params,
                    train.sample(i),
                    Mode::Train,
                    config.dropout,
                    Some(&mut rng),
                    &mut cache,
                )
                .map_err(|e| match e {
                    Error::NonFinite { .. } => Error::NonFinite { epoch, step },
                    other => other,
                })?;
                backward(&model.layout, &model.params, &cache, scale * (pred - train.targets[i]), &mut grads);
            }
            adam.step(&mut model.params, &grads);
            if model.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged { epoch, history });
            }
        }

        let losses = model.mse_on(train).and_then(|t| Ok((t, model.mse_on(val)?)));
        let (train_mse, val_mse) = match losses {
            Ok((t, v)) if t.is_finite() && v.is_finite() => (t, v),
            _ => return Err(Error::Diverged { epoch, history }),
        };
        history.push(EpochLoss {
            epoch,
            train_mse,
            val_mse,
        });
        if best.as_ref().map_or(true, |(b, _, _)| val_mse < *b) {
            best = Some((val_mse, epoch, model.params.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    let (_, best_epoch, params) = best.expect("at least one epoch runs");
    model.params = params;
    model.best_epoch = best_epoch;
    model.loss_history = history;
    Ok(model)
}

/// One parameter block as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LstmRepr {
    config: LstmConfig,
    seed: u64,
    n_inputs: usize,
    weights: Vec<WeightBlock>,
    loss_history: Vec<EpochLoss>,
    best_epoch: usize,
}

impl From<LstmModel> for LstmRepr {
    fn from(m: LstmModel) -> Self {
        let weights = m
            .layout
            .blocks()
            .into_iter()
            .map(|b| WeightBlock {
                data: m.params[b.range.clone()].to_vec(),
                name: b.name,
                shape: b.shape,
            })
            .collect();
        LstmRepr {
            config: m.config,
            seed: m.seed,
            n_inputs: m.layout.n_inputs,
            weights,
            loss_history: m.loss_history,
            best_epoch: m.best_epoch,
        }
    }
}

impl TryFrom<LstmRepr> for LstmModel {
    type Error = String;

    fn try_from(r: LstmRepr) -> std::result::Result<Self, String> {
        let layout = Layout::new(r.n_inputs, r.config.hidden_size, r.config.layers);
        let blocks = layout.blocks();
        if blocks.len() != r.weights.len() {
            return Err(format!("expected {} weight blocks, found {}", blocks.len(), r.weights.len()));
        }
        let mut params = vec![0.0; layout.total];
        for (b, w) in blocks.iter().zip(&r.weights) {
            if b.name != w.name || b.shape != w.shape || w.data.len() != b.range.len() {
                return Err(format!("weight block {} does not match the layout", w.name));
            }
            params[b.range.clone()].copy_from_slice(&w.data);
        }
        Ok(LstmModel {
            config: r.config,
            seed: r.seed,
            layout,
            params,
            loss_history: r.loss_history,
            best_epoch: r.best_epoch,
        })
    }
}
