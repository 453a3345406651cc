use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureRow, TARGET_COLUMN};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalerKind {
    #[default]
    MinMax,
    ZScore,
}

/// Fitted statistics for one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

/// Per-column affine scaler fitted on a training block.
///
/// Min-max maps `x` to `(x - min) / (max - min)` without clipping; a
/// constant column maps to 0 and inverts back to its stored minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub kind: ScalerKind,
    pub columns: Vec<ColumnScale>,
}

impl Scaler {
    fn column(&self, name: &str) -> Result<&ColumnScale> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    fn offset_span(&self, c: &ColumnScale) -> (f64, f64) {
        match self.kind {
            ScalerKind::MinMax => (c.min, c.max - c.min),
            ScalerKind::ZScore => (c.mean, c.std),
        }
    }

    pub fn transform_value(&self, column: &str, x: f64) -> Result<f64> {
        let (offset, span) = self.offset_span(self.column(column)?);
        Ok(if span > 0.0 { (x - offset) / span } else { 0.0 })
    }

    pub fn inverse_value(&self, column: &str, y: f64) -> Result<f64> {
        let (offset, span) = self.offset_span(self.column(column)?);
        Ok(if span > 0.0 { y * span + offset } else { offset })
    }

    pub fn inverse_transform(&self, values: &[f64], column: &str) -> Result<Vec<f64>> {
        let (offset, span) = self.offset_span(self.column(column)?);
        Ok(values
            .iter()
            .map(|&y| if span > 0.0 { y * span + offset } else { offset })
            .collect())
    }

    /// Scales every feature column and the target of `block`.
    pub fn transform(&self, block: &FeatureMatrix) -> Result<FeatureMatrix> {
        let params = block
            .column_names
            .iter()
            .map(|name| self.column(name).map(|c| self.offset_span(c)))
            .collect::<Result<Vec<_>>>()?;
        let target = self.offset_span(self.column(TARGET_COLUMN)?);
        let scale = |x: f64, (offset, span): (f64, f64)| {
            if span > 0.0 {
                (x - offset) / span
            } else {
                0.0
            }
        };
        let rows = block
            .rows
            .iter()
            .map(|r| FeatureRow {
                timestamp: r.timestamp,
                values: r.values.iter().zip(&params).map(|(&x, &p)| scale(x, p)).collect(),
                target_close: scale(r.target_close, target),
            })
            .collect();
        Ok(FeatureMatrix {
            column_names: block.column_names.clone(),
            rows,
            warmup_dropped: block.warmup_dropped,
        })
    }
}

/// Fits per-column statistics from `train` rows only. `columns` may name
/// feature columns and [`TARGET_COLUMN`].
pub fn fit_scaler(train: &FeatureMatrix, columns: &[String], kind: ScalerKind) -> Result<Scaler> {
    if train.is_empty() {
        return Err(Error::Empty("training block"));
    }
    let columns = columns
        .iter()
        .map(|name| {
            let values = train.column(name)?;
            let n = values.len() as f64;
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = values.iter().sum::<f64>() / n;
            let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            Ok(ColumnScale {
                name: name.clone(),
                min,
                max,
                mean,
                std,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scaler { kind, columns })
}

/// Feature columns plus the target: the default scaler coverage.
pub fn scaled_columns(matrix: &FeatureMatrix) -> Vec<String> {
    let mut cols = matrix.column_names.clone();
    cols.push(TARGET_COLUMN.to_string());
    cols
}
