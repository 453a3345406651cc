use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, TARGET_COLUMN};

/// Sliding-window samples over one scaled block.
///
/// Every time step carries the row's feature values followed by the row's
/// own (scaled) close, so the input width is `n_features + 1`. Sample `i`
/// holds rows `i..i+W` and targets the close of row `i+W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedDataset {
    pub window_length: usize,
    pub input_columns: Vec<String>,
    /// Row-major `[sample][step][input]`.
    inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub target_timestamps: Vec<DateTime<Utc>>,
    /// Timestamp of the last input row of each sample.
    pub last_input_timestamps: Vec<DateTime<Utc>>,
    pub first_input_timestamps: Vec<DateTime<Utc>>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_columns.len()
    }

    /// `W x F` block of sample `i`, row-major.
    pub fn sample(&self, i: usize) -> &[f64] {
        let stride = self.window_length * self.n_inputs();
        &self.inputs[i * stride..(i + 1) * stride]
    }

    /// Last time step of sample `i`.
    pub fn last_step(&self, i: usize) -> &[f64] {
        let f = self.n_inputs();
        let s = self.sample(i);
        &s[s.len() - f..]
    }

    /// Builds a dataset from explicit samples; each entry of `inputs` is a
    /// flattened `W x F` block.
    pub fn from_samples(
        window_length: usize,
        input_columns: Vec<String>,
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: inputs.len(),
                right: targets.len(),
            });
        }
        let stride = window_length * input_columns.len();
        if let Some(bad) = inputs.iter().find(|x| x.len() != stride) {
            return Err(Error::LengthMismatch {
                left: bad.len(),
                right: stride,
            });
        }
        let n = targets.len();
        let ts = |i: usize| DateTime::<Utc>::from_timestamp(i as i64, 0).unwrap();
        Ok(WindowedDataset {
            window_length,
            input_columns,
            inputs: inputs.concat(),
            targets,
            target_timestamps: (0..n).map(|i| ts(i + window_length)).collect(),
            last_input_timestamps: (0..n).map(|i| ts(i + window_length - 1)).collect(),
            first_input_timestamps: (0..n).map(ts).collect(),
        })
    }
}

/// Input labels per time step: features then the row's close.
pub fn input_columns(block: &FeatureMatrix) -> Vec<String> {
    let mut cols = block.column_names.clone();
    cols.push(TARGET_COLUMN.to_string());
    cols
}

pub fn make_windows(block: &FeatureMatrix, window_length: usize) -> Result<WindowedDataset> {
    if window_length == 0 {
        return Err(Error::InvalidConfig("window length must be >= 1".into()));
    }
    let n = block.len();
    if n <= window_length {
        return Err(Error::SeriesTooShort {
            needed: window_length + 1,
            got: n,
        });
    }
    let count = n - window_length;
    let width = block.n_features() + 1;
    let mut inputs = Vec::with_capacity(count * window_length * width);
    for i in 0..count {
        for row in &block.rows[i..i + window_length] {
            inputs.extend_from_slice(&row.values);
            inputs.push(row.target_close);
        }
    }
    Ok(WindowedDataset {
        window_length,
        input_columns: input_columns(block),
        inputs,
        targets: (0..count).map(|i| block.rows[i + window_length].target_close).collect(),
        target_timestamps: (0..count)
            .map(|i| block.rows[i + window_length].timestamp)
            .collect(),
        last_input_timestamps: (0..count)
            .map(|i| block.rows[i + window_length - 1].timestamp)
            .collect(),
        first_input_timestamps: (0..count).map(|i| block.rows[i].timestamp).collect(),
    })
}
