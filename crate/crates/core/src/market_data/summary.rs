use serde::{Deserialize, Serialize};

use super::{Candle, CandleSeries};
use crate::error::{Error, Result};

/// Skewness above which a field is flagged as right-skewed.
pub const RIGHT_SKEW_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` equally spaced edges spanning [min, max].
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub field: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    /// Standardized third central moment, `m3 / m2^1.5`; zero for constant data.
    pub skewness: f64,
    pub right_skewed: bool,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub symbol: String,
    pub bars: usize,
    pub fields: Vec<FieldSummary>,
}

impl SeriesSummary {
    pub fn field(&self, name: &str) -> Option<&FieldSummary> {
        self.fields.iter().find(|f| f.field == name)
    }
}

const FIELDS: [(&str, fn(&Candle) -> f64); 6] = [
    ("open", |c| c.open),
    ("high", |c| c.high),
    ("low", |c| c.low),
    ("close", |c| c.close),
    ("volume_base", |c| c.volume_base),
    ("volume_quote", |c| c.volume_quote),
];

pub fn summarize(series: &CandleSeries, bins: usize) -> Result<SeriesSummary> {
    if series.is_empty() {
        return Err(Error::Empty("candle series"));
    }
    let bins = bins.max(1);
    let fields = FIELDS
        .iter()
        .map(|(name, get)| {
            let values: Vec<f64> = series.candles.iter().map(get).collect();
            summarize_values(name, &values, bins)
        })
        .collect();
    Ok(SeriesSummary {
        symbol: series.symbol.clone(),
        bars: series.len(),
        fields,
    })
}

fn summarize_values(name: &str, values: &[f64], bins: usize) -> FieldSummary {
    let n = values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    // Constant data has no spread; guard on the range since the mean itself
    // may carry rounding error.
    let skewness = if max > min && m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    };

    let width = (max - min) / bins as f64;
    let edges = (0..=bins).map(|i| min + width * i as f64).collect();
    let mut counts = vec![0; bins];
    for v in values {
        let idx = if width > 0.0 {
            (((v - min) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }

    FieldSummary {
        field: name.to_string(),
        min,
        max,
        mean,
        median,
        skewness,
        right_skewed: skewness > RIGHT_SKEW_THRESHOLD,
        histogram: Histogram { edges, counts },
    }
}
