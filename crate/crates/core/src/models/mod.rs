//! Regression families behind one fit/predict contract.

pub mod adam;
pub mod boost;
pub mod forest;
pub mod grid;
pub mod linear;
pub mod lstm;
pub mod persist;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use boost::{fit_gradient_boost, BoostParams, BoostedModel};
pub use forest::{fit_random_forest, ForestModel, ForestParams};
pub use grid::{grid_search, BoostGrid, GridCell, GridOutcome};
pub use linear::{fit_ols, LinearModel, LinearParams};
pub use lstm::{lstm_train, EpochLoss, LstmConfig, LstmModel};
pub use tree::{fit_tree, RegressionTree, TreeParams};

use crate::dataset::{Block, DatasetBundle, WindowedDataset};
use crate::error::{Error, Result};
use crate::hashing::substream_seed;

/// Dense row-major design matrix with targets.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatData {
    pub n_features: usize,
    x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FlatData {
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if rows.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: y.len(),
            });
        }
        let n_features = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_features) {
            return Err(Error::LengthMismatch {
                left: bad.len(),
                right: n_features,
            });
        }
        Ok(FlatData {
            n_features,
            x: rows.concat(),
            y,
        })
    }

    /// Uses the last time step of every window as the feature row.
    pub fn from_windows(data: &WindowedDataset) -> Self {
        let mut x = Vec::with_capacity(data.len() * data.n_inputs());
        for i in 0..data.len() {
            x.extend_from_slice(data.last_step(i));
        }
        FlatData {
            n_features: data.n_inputs(),
            x,
            y: data.targets.clone(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "linear")]
    Linear,
    #[serde(rename = "rf")]
    RandomForest,
    #[serde(rename = "xgb")]
    GradientBoost,
    #[serde(rename = "lstm")]
    Lstm,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Linear, Family::RandomForest, Family::GradientBoost, Family::Lstm];

    pub fn key(self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::RandomForest => "rf",
            Family::GradientBoost => "xgb",
            Family::Lstm => "lstm",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Family::Linear => "Linear Regression",
            Family::RandomForest => "Random Forest Regressor",
            Family::GradientBoost => "XGBoost Regressor",
            Family::Lstm => "LSTM",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Family::Linear),
            "rf" | "random_forest" => Ok(Family::RandomForest),
            "xgb" | "gradient_boost" => Ok(Family::GradientBoost),
            "lstm" => Ok(Family::Lstm),
            other => Err(Error::InvalidConfig(format!(
                "unknown model family {other:?} (expected linear, rf, xgb or lstm)"
            ))),
        }
    }
}

/// Per-family hyperparameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub linear: LinearParams,
    pub rf: ForestParams,
    pub xgb: BoostParams,
    /// When set, the boosting parameters are chosen by validation grid search.
    pub xgb_grid: Option<BoostGrid>,
    pub lstm: LstmConfig,
}

impl ModelsConfig {
    pub fn window_length(&self, family: Family) -> usize {
        match family {
            Family::Lstm => self.lstm.window_length,
            _ => 1,
        }
    }
}

/// Shared prediction contract. `sample` is a flattened `W x F` window;
/// flat models read only its last step.
pub trait Regressor: Send + Sync {
    fn family(&self) -> Family;

    fn predict_sample(&self, sample: &[f64], n_inputs: usize) -> Result<f64>;

    fn predict(&self, data: &WindowedDataset) -> Result<Vec<f64>> {
        (0..data.len())
            .map(|i| self.predict_sample(data.sample(i), data.n_inputs()))
            .collect()
    }
}

fn last_step(sample: &[f64], n_inputs: usize) -> Result<&[f64]> {
    if n_inputs == 0 || sample.len() < n_inputs {
        return Err(Error::SchemaMismatch(format!(
            "sample of {} values is shorter than one step of {n_inputs}",
            sample.len()
        )));
    }
    Ok(&sample[sample.len() - n_inputs..])
}

impl Regressor for LinearModel {
    fn family(&self) -> Family {
        Family::Linear
    }

    fn predict_sample(&self, sample: &[f64], n_inputs: usize) -> Result<f64> {
        if n_inputs != self.weights.len() {
            return Err(Error::SchemaMismatch(format!(
                "linear model has {} weights, input has {n_inputs} columns",
                self.weights.len()
            )));
        }
        Ok(self.predict_row(last_step(sample, n_inputs)?))
    }
}

impl Regressor for ForestModel {
    fn family(&self) -> Family {
        Family::RandomForest
    }

    fn predict_sample(&self, sample: &[f64], n_inputs: usize) -> Result<f64> {
        Ok(self.predict_row(last_step(sample, n_inputs)?))
    }
}

impl Regressor for BoostedModel {
    fn family(&self) -> Family {
        Family::GradientBoost
    }

    fn predict_sample(&self, sample: &[f64], n_inputs: usize) -> Result<f64> {
        Ok(self.predict_row(last_step(sample, n_inputs)?))
    }
}

impl Regressor for LstmModel {
    fn family(&self) -> Family {
        Family::Lstm
    }

    fn predict_sample(&self, sample: &[f64], n_inputs: usize) -> Result<f64> {
        if n_inputs != self.n_inputs() {
            return Err(Error::SchemaMismatch(format!(
                "lstm expects {} inputs per step, got {n_inputs}",
                self.n_inputs()
            )));
        }
        LstmModel::predict_sample(self, sample)
    }

    fn predict(&self, data: &WindowedDataset) -> Result<Vec<f64>> {
        LstmModel::predict(self, data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params")]
pub enum FittedModel {
    #[serde(rename = "linear")]
    Linear(LinearModel),
    #[serde(rename = "rf")]
    RandomForest(ForestModel),
    #[serde(rename = "xgb")]
    GradientBoost(BoostedModel),
    #[serde(rename = "lstm")]
    Lstm(LstmModel),
}

impl FittedModel {
    fn inner(&self) -> &dyn Regressor {
        match self {
            FittedModel::Linear(m) => m,
            FittedModel::RandomForest(m) => m,
            FittedModel::GradientBoost(m) => m,
            FittedModel::Lstm(m) => m,
        }
    }
}

/// A fitted model together with the input layout it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub input_columns: Vec<String>,
    pub window_length: usize,
    pub seed: u64,
    pub model: FittedModel,
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        self.model.inner().family()
    }

    pub fn loss_history(&self) -> Option<&[EpochLoss]> {
        match &self.model {
            FittedModel::Lstm(m) => Some(&m.loss_history),
            _ => None,
        }
    }

    pub fn check_inputs(&self, data: &WindowedDataset) -> Result<()> {
        if data.input_columns != self.input_columns || data.window_length != self.window_length {
            return Err(Error::SchemaMismatch(format!(
                "model trained on {} x [{}], data is {} x [{}]",
                self.window_length,
                self.input_columns.join(","),
                data.window_length,
                data.input_columns.join(",")
            )));
        }
        Ok(())
    }
}

impl Regressor for TrainedModel {
    fn family(&self) -> Family {
        TrainedModel::family(self)
    }

    fn predict_sample(&self, sample: &[f64], n_inputs: usize) -> Result<f64> {
        if n_inputs != self.input_columns.len() || sample.len() != n_inputs * self.window_length {
            return Err(Error::SchemaMismatch(format!(
                "expected {} x {} inputs, got {} values",
                self.window_length,
                self.input_columns.len(),
                sample.len()
            )));
        }
        self.model.inner().predict_sample(sample, n_inputs)
    }

    fn predict(&self, data: &WindowedDataset) -> Result<Vec<f64>> {
        self.check_inputs(data)?;
        self.model.inner().predict(data)
    }
}

/// Result of fitting one family, with the grid table when one was searched.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub model: TrainedModel,
    pub grid: Option<GridOutcome<BoostParams>>,
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64
}

/// Fits `family` on the bundle's train block, using the validation block
/// for early stopping or model selection where the family needs it. Each
/// family draws from its own seed substream.
pub fn fit_family(family: Family, bundle: &DatasetBundle, config: &ModelsConfig, seed: u64) -> Result<FitOutcome> {
    let window_length = config.window_length(family);
    let train = bundle.windows(Block::Train, window_length)?;
    let val = bundle.windows(Block::Val, window_length)?;
    let family_seed = substream_seed(seed, family.key());
    let mut grid = None;
    let model = match family {
        Family::Linear => FittedModel::Linear(fit_ols(&FlatData::from_windows(&train), config.linear.ridge_lambda)?),
        Family::RandomForest => {
            FittedModel::RandomForest(fit_random_forest(&FlatData::from_windows(&train), &config.rf, family_seed)?)
        }
        Family::GradientBoost => {
            let tr = FlatData::from_windows(&train);
            let va = FlatData::from_windows(&val);
            match &config.xgb_grid {
                Some(g) => {
                    let cells = g.cells(&config.xgb);
                    let (outcome, model) = grid_search(
                        &cells,
                        |p| fit_gradient_boost(&tr, Some(&va), p),
                        |m: &BoostedModel| {
                            let pred: Vec<f64> = (0..va.len()).map(|i| m.predict_row(va.row(i))).collect();
                            Ok(mse(&pred, &va.y))
                        },
                    )?;
                    grid = Some(outcome);
                    FittedModel::GradientBoost(model)
                }
                None => FittedModel::GradientBoost(fit_gradient_boost(&tr, Some(&va), &config.xgb)?),
            }
        }
        Family::Lstm => FittedModel::Lstm(lstm_train(&train, &val, &config.lstm, family_seed)?),
    };
    Ok(FitOutcome {
        model: TrainedModel {
            input_columns: train.input_columns.clone(),
            window_length,
            seed,
            model,
        },
        grid,
    })
}
