use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.70,
            val_fraction: 0.15,
            test_fraction: 0.15,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train_fraction, self.val_fraction, self.test_fraction];
        if f.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidConfig("split fractions must be positive".into()));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("split fractions must sum to 1".into()));
        }
        Ok(())
    }

    /// Block sizes `floor(n*train)`, `floor(n*val)` and the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // The tiny nudge keeps products like 100 * 0.7 = 69.999... at 70.
        let floor = |frac: f64| ((n as f64 * frac) + 1e-9).floor() as usize;
        let train = floor(self.train_fraction).min(n);
        let val = floor(self.val_fraction).min(n - train);
        (train, val, n - train - val)
    }
}

/// Half-open row ranges of the three blocks in the source matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: (usize, usize),
    pub val: (usize, usize),
    pub test: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: FeatureMatrix,
    pub val: FeatureMatrix,
    pub test: FeatureMatrix,
    pub indices: SplitIndices,
}

pub fn split_chronological(matrix: &FeatureMatrix, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if matrix.is_empty() {
        return Err(Error::Empty("feature matrix"));
    }
    let (a, b, c) = spec.sizes(matrix.len());
    for (size, name) in [(a, "train"), (b, "validation"), (c, "test")] {
        if size == 0 {
            return Err(Error::EmptySplit(name));
        }
    }
    let indices = SplitIndices {
        train: (0, a),
        val: (a, a + b),
        test: (a + b, a + b + c),
    };
    Ok(Split {
        train: matrix.slice(0..a),
        val: matrix.slice(a..a + b),
        test: matrix.slice(a + b..a + b + c),
        indices,
    })
}
