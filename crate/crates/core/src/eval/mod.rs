//! Price-unit metrics, per-model evaluation and the ablation harness.

mod experiment;
mod table;

use std::io::Write;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

pub use experiment::{
    run_ablation, run_experiment, AblationReport, Deltas, ExperimentConfig, ExperimentResult,
    FamilyAblation, FamilyRun, shared_rows_hash,
};
pub use table::{liquidity_label, render_table, table_rows, ReferenceRow, TableRow, TABLE_HEADER};

use crate::dataset::{Block, DatasetBundle};
use crate::error::{Error, Result};
use crate::features::TARGET_COLUMN;
use crate::models::{Family, Regressor, TrainedModel};

pub const PRICE_UNITS: &str = "price";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub mse: f64,
    /// `None` when the actual series has zero variance.
    pub r2: Option<f64>,
}

/// MAE, MSE and R² with the mean of `actual` as the baseline.
pub fn compute_metrics(actual: &[f64], predicted: &[f64]) -> Result<Metrics> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: actual.len(),
            right: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::Empty("metric input"));
    }
    let n = actual.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    for (a, p) in actual.iter().zip(predicted) {
        let e = a - p;
        abs += e.abs();
        sq += e * e;
    }
    let mean = actual.iter().sum::<f64>() / n;
    let sst: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    Ok(Metrics {
        mae: abs / n,
        mse: sq / n,
        r2: (sst > 0.0).then(|| 1.0 - sq / sst),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub family: Family,
    pub model: String,
    pub liquidity_included: bool,
    pub block: Block,
    pub mae: f64,
    pub mse: f64,
    pub r2: Option<f64>,
    pub r2_defined: bool,
    pub n_test: usize,
    pub seed: u64,
    pub config_hash: String,
    pub manifest_hash: String,
    pub units: String,
}

impl EvalReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        family: Family,
        liquidity_included: bool,
        block: Block,
        metrics: Metrics,
        n_test: usize,
        seed: u64,
        config_hash: String,
        manifest_hash: String,
    ) -> Result<Self> {
        let Metrics { mae, mse, r2 } = metrics;
        if !(mae.is_finite() && mse.is_finite() && mae >= 0.0 && mse >= 0.0) {
            return Err(Error::NonFinite { epoch: 0, step: 0 });
        }
        // Cauchy-Schwarz: the mean absolute error cannot exceed the RMS error.
        if mae * mae > mse * (1.0 + 1e-12) {
            return Err(Error::Integrity(format!("mae^2 {} exceeds mse {mse}", mae * mae)));
        }
        if r2.is_some_and(|r| r > 1.0 + 1e-12) {
            return Err(Error::Integrity(format!("r2 {r2:?} exceeds 1")));
        }
        Ok(EvalReport {
            family,
            model: family.display_name().to_string(),
            liquidity_included,
            block,
            mae,
            mse,
            r2,
            r2_defined: r2.is_some(),
            n_test,
            seed,
            config_hash,
            manifest_hash,
            units: PRICE_UNITS.to_string(),
        })
    }
}

/// Actual and predicted closes in price units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSeries {
    pub timestamps: Vec<DateTime<Utc>>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl PredictionSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// CSV with header `timestamp,actual,predicted`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "actual", "predicted"])?;
        for ((t, a), p) in self.timestamps.iter().zip(&self.actual).zip(&self.predicted) {
            w.write_record([t.to_rfc3339_opts(SecondsFormat::Secs, true), a.to_string(), p.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Scores `model` on one block of the bundle it was trained on.
///
/// Model outputs are mapped back to price units with the bundle's scaler;
/// actuals are the unscaled closes of the same rows.
pub fn evaluate(model: &TrainedModel, bundle: &DatasetBundle, block: Block) -> Result<(EvalReport, PredictionSeries)> {
    evaluate_with_hash(model, bundle, block, &bundle.manifest.hash())
}

pub fn evaluate_with_hash(
    model: &TrainedModel,
    bundle: &DatasetBundle,
    block: Block,
    config_hash: &str,
) -> Result<(EvalReport, PredictionSeries)> {
    let series = predict_block(model, bundle, block)?;
    let metrics = compute_metrics(&series.actual, &series.predicted)?;
    let liquidity = bundle.feature_config.include_liquidity;
    let report = EvalReport::new(
        model.family(),
        liquidity,
        block,
        metrics,
        series.len(),
        model.seed,
        config_hash.to_string(),
        bundle.manifest.hash(),
    )?;
    Ok((report, series))
}

pub fn predict_block(model: &TrainedModel, bundle: &DatasetBundle, block: Block) -> Result<PredictionSeries> {
    let windows = bundle.windows(block, model.window_length)?;
    let scaled = model.predict(&windows)?;
    let predicted = bundle.scaler.inverse_transform(&scaled, TARGET_COLUMN)?;
    let raw = bundle.unscaled(block);
    let actual: Vec<f64> = raw.rows[model.window_length..].iter().map(|r| r.target_close).collect();
    let timestamps: Vec<DateTime<Utc>> = raw.rows[model.window_length..].iter().map(|r| r.timestamp).collect();
    if timestamps != windows.target_timestamps {
        return Err(Error::Integrity("prediction rows are misaligned with the block".into()));
    }
    Ok(PredictionSeries {
        timestamps,
        actual,
        predicted,
    })
}
