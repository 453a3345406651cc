//! File-driven run configuration and the per-run manifest.

use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::dataset::{ScalerKind, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::ExperimentConfig;
use crate::features::FeatureConfig;
use crate::fsutil::{read_to_string, write_json_atomic};
use crate::hashing::{bytes_hash, content_hash};
use crate::market_data::{fill_gaps, load_candles, CandleSeries, CsvSchema, GapPolicy, IngestReport};
use crate::models::{Family, ModelsConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Input CSV; relative paths resolve against the config file's directory.
    pub path: PathBuf,
    pub schema: CsvSchema,
    pub gap_policy: GapPolicy,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            path: PathBuf::from("data/xrp_usdt_daily_sample.csv"),
            schema: CsvSchema::default(),
            gap_policy: GapPolicy::default(),
        }
    }
}

/// One file that drives every command. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub families: Vec<Family>,
    pub scaler: ScalerKind,
    pub data: DataConfig,
    pub features: FeatureConfig,
    pub split: SplitSpec,
    pub models: ModelsConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            output_dir: PathBuf::from("runs/default"),
            families: Family::ALL.to_vec(),
            scaler: ScalerKind::default(),
            data: DataConfig::default(),
            features: FeatureConfig::default(),
            split: SplitSpec::default(),
            models: ModelsConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.experiment().validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Hash of the configuration as written (paths unresolved).
    pub fn hash(&self) -> String {
        content_hash(self)
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            features: self.features.clone(),
            split: self.split,
            scaler: self.scaler,
            models: self.models.clone(),
            families: self.families.clone(),
            seed: self.seed,
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn data_path(&self) -> PathBuf {
        self.resolve(&self.data.path)
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Loads the input CSV and applies the gap policy.
    pub fn load_series(&self) -> Result<(CandleSeries, IngestReport)> {
        let (series, report) = load_candles(&self.data_path(), &self.data.schema)?;
        Ok((fill_gaps(&series, self.data.gap_policy)?, report))
    }

    pub fn input_hash(&self) -> Result<String> {
        let path = self.data_path();
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(bytes_hash(&bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

/// Written when a command starts and finalized when it ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub status: RunStatus,
    pub config_hash: Option<String>,
    pub input_hash: Option<String>,
    pub tool: String,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub outputs: Vec<String>,
    pub error: Option<String>,
}

pub const MANIFEST_FILE: &str = "run_manifest.json";

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn begin(dir: &Path, command: &str, config_hash: Option<String>, input_hash: Option<String>) -> Result<Self> {
        let m = RunManifest {
            command: command.to_string(),
            status: RunStatus::Running,
            config_hash,
            input_hash,
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: now(),
            finished_at: None,
            outputs: Vec::new(),
            error: None,
        };
        write_json_atomic(&dir.join(MANIFEST_FILE), &m)?;
        Ok(m)
    }

    pub fn record(&mut self, file: impl Into<String>) {
        self.outputs.push(file.into());
    }

    pub fn finish(mut self, dir: &Path, outcome: std::result::Result<(), &Error>) -> Result<()> {
        self.finished_at = Some(now());
        match outcome {
            Ok(()) => self.status = RunStatus::Complete,
            Err(e) => {
                self.status = RunStatus::Failed;
                self.error = Some(e.to_string());
            }
        }
        self.outputs.sort();
        self.outputs.dedup();
        write_json_atomic(&dir.join(MANIFEST_FILE), &self)
    }
}
