//! Chronological splitting, train-fitted scaling and sliding windows.

mod scaler;
mod split;
mod window;

use serde::{Deserialize, Serialize};

pub use scaler::{fit_scaler, scaled_columns, ColumnScale, Scaler, ScalerKind};
pub use split::{split_chronological, Split, SplitIndices, SplitSpec};
pub use window::{input_columns, make_windows, WindowedDataset};

use crate::error::Result;
use crate::features::{FeatureConfig, FeatureMatrix};
use crate::hashing::content_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Train,
    Val,
    Test,
}

/// Everything needed to rebuild a bundle exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub rows: usize,
    pub split: SplitIndices,
    pub columns: Vec<String>,
    pub scaler: Scaler,
    pub feature_config_hash: String,
    pub first_timestamp: String,
    pub last_timestamp: String,
}

impl BundleManifest {
    pub fn hash(&self) -> String {
        content_hash(self)
    }
}

/// Split, scaled data for one feature configuration. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub feature_config: FeatureConfig,
    pub raw: Split,
    pub train: FeatureMatrix,
    pub val: FeatureMatrix,
    pub test: FeatureMatrix,
    pub scaler: Scaler,
    pub manifest: BundleManifest,
}

impl DatasetBundle {
    /// Splits `matrix`, fits the scaler on the training block and scales all
    /// three blocks with it.
    pub fn build(
        matrix: &FeatureMatrix,
        feature_config: &FeatureConfig,
        spec: &SplitSpec,
        kind: ScalerKind,
    ) -> Result<Self> {
        let raw = split_chronological(matrix, spec)?;
        let scaler = fit_scaler(&raw.train, &scaled_columns(matrix), kind)?;
        let manifest = BundleManifest {
            rows: matrix.len(),
            split: raw.indices.clone(),
            columns: matrix.column_names.clone(),
            scaler: scaler.clone(),
            feature_config_hash: feature_config.hash(),
            first_timestamp: matrix.rows[0].timestamp.to_rfc3339(),
            last_timestamp: matrix.rows[matrix.len() - 1].timestamp.to_rfc3339(),
        };
        Ok(DatasetBundle {
            feature_config: feature_config.clone(),
            train: scaler.transform(&raw.train)?,
            val: scaler.transform(&raw.val)?,
            test: scaler.transform(&raw.test)?,
            raw,
            scaler,
            manifest,
        })
    }

    pub fn scaled(&self, block: Block) -> &FeatureMatrix {
        match block {
            Block::Train => &self.train,
            Block::Val => &self.val,
            Block::Test => &self.test,
        }
    }

    pub fn unscaled(&self, block: Block) -> &FeatureMatrix {
        match block {
            Block::Train => &self.raw.train,
            Block::Val => &self.raw.val,
            Block::Test => &self.raw.test,
        }
    }

    /// Windows built inside one block, so no sample spans a split boundary.
    pub fn windows(&self, block: Block, window_length: usize) -> Result<WindowedDataset> {
        make_windows(self.scaled(block), window_length)
    }

    pub fn input_columns(&self) -> Vec<String> {
        input_columns(&self.train)
    }
}
