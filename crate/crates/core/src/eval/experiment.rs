use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_with_hash, EvalReport, PredictionSeries, ReferenceRow, PRICE_UNITS};
use crate::dataset::{Block, DatasetBundle, ScalerKind, SplitIndices, SplitSpec};
use crate::error::{Error, Result};
use crate::features::{build_feature_matrix, FeatureConfig, FeatureMatrix, VVR_COLUMN, VWAP_COLUMN};
use crate::hashing::{bytes_hash, content_hash};
use crate::market_data::CandleSeries;
use crate::models::{fit_family, BoostParams, EpochLoss, Family, GridOutcome, ModelsConfig, TrainedModel};

/// Everything that determines an experiment's outputs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub features: FeatureConfig,
    pub split: SplitSpec,
    pub scaler: ScalerKind,
    pub models: ModelsConfig,
    pub families: Vec<Family>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            features: FeatureConfig::default(),
            split: SplitSpec::default(),
            scaler: ScalerKind::default(),
            models: ModelsConfig::default(),
            families: Family::ALL.to_vec(),
            seed: 42,
        }
    }
}

impl ExperimentConfig {
    pub fn hash(&self) -> String {
        content_hash(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.split.validate()?;
        if self.families.is_empty() {
            return Err(Error::InvalidConfig("families list is empty".into()));
        }
        let mut seen = self.families.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.families.len() {
            return Err(Error::InvalidConfig("families list has duplicates".into()));
        }
        self.models.lstm.validate()
    }
}

/// Outcome of one family on one bundle. Failures are kept, not dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRun {
    pub family: Family,
    pub liquidity_included: bool,
    pub report: Option<EvalReport>,
    pub error: Option<String>,
    pub loss_history: Option<Vec<EpochLoss>>,
    pub grid: Option<GridOutcome<BoostParams>>,
    #[serde(skip)]
    pub predictions: Option<PredictionSeries>,
    #[serde(skip)]
    pub model: Option<TrainedModel>,
}

fn run_family(family: Family, bundle: &DatasetBundle, cfg: &ExperimentConfig, config_hash: &str) -> FamilyRun {
    let liquidity_included = bundle.feature_config.include_liquidity;
    let attempt = fit_family(family, bundle, &cfg.models, cfg.seed).and_then(|fit| {
        let (report, predictions) = evaluate_with_hash(&fit.model, bundle, Block::Test, config_hash)?;
        Ok((fit, report, predictions))
    });
    match attempt {
        Ok((fit, report, predictions)) => FamilyRun {
            family,
            liquidity_included,
            report: Some(report),
            error: None,
            loss_history: fit.model.loss_history().map(<[_]>::to_vec),
            grid: fit.grid,
            predictions: Some(predictions),
            model: Some(fit.model),
        },
        Err(e) => FamilyRun {
            family,
            liquidity_included,
            report: None,
            error: Some(e.to_string()),
            loss_history: match e {
                Error::Diverged { history, .. } => Some(history),
                _ => None,
            },
            grid: None,
            predictions: None,
            model: None,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub manifest_hash: String,
    pub seed: u64,
    pub units: String,
    pub runs: Vec<FamilyRun>,
    #[serde(skip)]
    pub bundle: Option<DatasetBundle>,
}

/// Trains every configured family on one shared bundle and scores each on
/// the test block.
pub fn run_experiment(series: &CandleSeries, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let matrix = build_feature_matrix(series, &cfg.features)?;
    let bundle = DatasetBundle::build(&matrix, &cfg.features, &cfg.split, cfg.scaler)?;
    let config_hash = cfg.hash();
    let runs = cfg
        .families
        .par_iter()
        .map(|&f| run_family(f, &bundle, cfg, &config_hash))
        .collect();
    Ok(ExperimentResult {
        config_hash,
        manifest_hash: bundle.manifest.hash(),
        seed: cfg.seed,
        units: PRICE_UNITS.to_string(),
        runs,
        bundle: Some(bundle),
    })
}

/// With-minus-without differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub mae: f64,
    pub mse: f64,
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyAblation {
    pub family: Family,
    pub with_liquidity: FamilyRun,
    pub without_liquidity: FamilyRun,
    pub deltas: Option<Deltas>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub config_hash: String,
    pub seed: u64,
    pub units: String,
    /// Hash of timestamps, targets and non-liquidity columns, equal for both arms.
    pub shared_rows_hash: String,
    pub split: SplitIndices,
    pub families: Vec<FamilyAblation>,
    pub reference: ReferenceRow,
}

/// Hash over the row set both arms must share: timestamps, targets and
/// every column other than the liquidity pair, keyed by column name.
pub fn shared_rows_hash(matrix: &FeatureMatrix) -> String {
    let keep: Vec<usize> = (0..matrix.n_features())
        .filter(|&j| matrix.column_names[j] != VVR_COLUMN && matrix.column_names[j] != VWAP_COLUMN)
        .collect();
    let mut bytes = Vec::new();
    for &j in &keep {
        bytes.extend_from_slice(matrix.column_names[j].as_bytes());
        bytes.push(0);
    }
    for r in &matrix.rows {
        bytes.extend_from_slice(&r.timestamp.timestamp().to_le_bytes());
        bytes.extend_from_slice(&r.target_close.to_bits().to_le_bytes());
        for &j in &keep {
            bytes.extend_from_slice(&r.values[j].to_bits().to_le_bytes());
        }
    }
    bytes_hash(&bytes)
}

/// Runs every family twice on bundles that differ only in the liquidity
/// columns, and pairs the results.
///
/// Both arms draw their rows from one liquidity-on feature matrix, so the
/// warm-up, split boundaries and all other columns are identical.
pub fn run_ablation(series: &CandleSeries, cfg: &ExperimentConfig) -> Result<AblationReport> {
    cfg.validate()?;
    let on_cfg = FeatureConfig {
        include_liquidity: true,
        ..cfg.features.clone()
    };
    let off_cfg = FeatureConfig {
        include_liquidity: false,
        ..cfg.features.clone()
    };
    let on = build_feature_matrix(series, &on_cfg)?;
    let off = on.without_columns(&[VVR_COLUMN, VWAP_COLUMN]);
    if off.column_names != off_cfg.column_names() {
        return Err(Error::Integrity("liquidity-off columns do not match its feature config".into()));
    }
    let shared = shared_rows_hash(&on);
    if shared_rows_hash(&off) != shared {
        return Err(Error::Integrity("ablation arms do not share their rows".into()));
    }
    let bundle_on = DatasetBundle::build(&on, &on_cfg, &cfg.split, cfg.scaler)?;
    let bundle_off = DatasetBundle::build(&off, &off_cfg, &cfg.split, cfg.scaler)?;
    if bundle_on.raw.indices != bundle_off.raw.indices {
        return Err(Error::Integrity("ablation arms have different split boundaries".into()));
    }

    let config_hash = cfg.hash();
    let cells: Vec<(Family, bool)> = cfg.families.iter().flat_map(|&f| [(f, true), (f, false)]).collect();
    let mut runs: Vec<FamilyRun> = cells
        .par_iter()
        .map(|&(f, liq)| run_family(f, if liq { &bundle_on } else { &bundle_off }, cfg, &config_hash))
        .collect();

    let mut families = Vec::with_capacity(cfg.families.len());
    let mut drain = runs.drain(..);
    while let (Some(with), Some(without)) = (drain.next(), drain.next()) {
        let deltas = match (&with.report, &without.report) {
            (Some(a), Some(b)) => Some(Deltas {
                mae: a.mae - b.mae,
                mse: a.mse - b.mse,
                r2: a.r2.zip(b.r2).map(|(x, y)| x - y),
            }),
            _ => None,
        };
        families.push(FamilyAblation {
            family: with.family,
            with_liquidity: with,
            without_liquidity: without,
            deltas,
        });
    }
    Ok(AblationReport {
        config_hash,
        seed: cfg.seed,
        units: PRICE_UNITS.to_string(),
        shared_rows_hash: shared,
        split: bundle_on.raw.indices.clone(),
        families,
        reference: ReferenceRow::published(),
    })
}
