//! Engineered predictors and the supervised learning table.
//!
//! Every column of row `t` is computed from bars `..=t`; lagged closes come
//! strictly from earlier bars. Rolling features are evaluated window by
//! window, so a row never depends on bars outside its own windows.

mod export;
mod indicators;
mod liquidity;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use export::{read_feature_csv, write_feature_csv, FeatureSchema};
pub use indicators::{compute_ema, compute_macd, compute_rsi, compute_sma, Macd};
pub use liquidity::{compute_typical_price, compute_vvr, compute_vwap, VolumeField};

use crate::error::{Error, Result};
use crate::hashing::content_hash;
use crate::market_data::CandleSeries;

pub const VVR_COLUMN: &str = "vvr";
pub const VWAP_COLUMN: &str = "vwap";
pub const TARGET_COLUMN: &str = "target_close";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacdParams {
    pub fast: usize,
    pub slow: usize,
    pub signal: usize,
}

impl Default for MacdParams {
    fn default() -> Self {
        MacdParams {
            fast: 12,
            slow: 26,
            signal: 9,
        }
    }
}

/// VWAP summation range: the trailing `n` bars, or every bar from the
/// start of the series. Written as an integer or `"cumulative"` in config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VwapWindowRepr", into = "VwapWindowRepr")]
pub enum VwapWindow {
    Rolling(usize),
    Cumulative,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum VwapWindowRepr {
    Bars(usize),
    Named(String),
}

impl TryFrom<VwapWindowRepr> for VwapWindow {
    type Error = String;

    fn try_from(repr: VwapWindowRepr) -> std::result::Result<Self, String> {
        match repr {
            VwapWindowRepr::Bars(n) => Ok(VwapWindow::Rolling(n)),
            VwapWindowRepr::Named(s) if s == "cumulative" => Ok(VwapWindow::Cumulative),
            VwapWindowRepr::Named(s) => Err(format!(
                "vwap_window must be a bar count or \"cumulative\", got {s:?}"
            )),
        }
    }
}

impl From<VwapWindow> for VwapWindowRepr {
    fn from(w: VwapWindow) -> Self {
        match w {
            VwapWindow::Rolling(n) => VwapWindowRepr::Bars(n),
            VwapWindow::Cumulative => VwapWindowRepr::Named("cumulative".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub lags: Vec<usize>,
    pub sma_windows: Vec<usize>,
    #[serde(with = "crate::optional")]
    pub rsi_period: Option<usize>,
    #[serde(with = "crate::optional")]
    pub macd: Option<MacdParams>,
    /// Range floor in the volume-to-volatility ratio.
    pub epsilon: f64,
    pub vwap_window: VwapWindow,
    pub vwap_volume: VolumeField,
    pub include_typical_price: bool,
    pub include_liquidity: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            lags: vec![1, 2, 3],
            sma_windows: vec![7, 14],
            rsi_period: Some(14),
            macd: Some(MacdParams::default()),
            epsilon: 1e-6,
            vwap_window: VwapWindow::Rolling(14),
            vwap_volume: VolumeField::Base,
            include_typical_price: true,
            include_liquidity: true,
        }
    }
}

impl FeatureConfig {
    /// Bare configuration: only the given lags, no indicators, no liquidity.
    pub fn lags_only(lags: Vec<usize>) -> Self {
        FeatureConfig {
            lags,
            sma_windows: vec![],
            rsi_period: None,
            macd: None,
            include_typical_price: false,
            include_liquidity: false,
            ..FeatureConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.lags.is_empty() {
            return bad("lags must be non-empty");
        }
        if self.lags.contains(&0) || self.lags.windows(2).any(|w| w[0] >= w[1]) {
            return bad("lags must be positive and strictly increasing");
        }
        if self.sma_windows.contains(&0) {
            return bad("sma windows must be >= 1");
        }
        if self.rsi_period == Some(0) {
            return bad("rsi_period must be >= 1");
        }
        if let Some(m) = self.macd {
            if m.fast == 0 || m.signal == 0 {
                return bad("macd lengths must be >= 1");
            }
            if m.fast >= m.slow {
                return bad("macd fast length must be below slow length");
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if self.vwap_window == VwapWindow::Rolling(0) {
            return bad("vwap_window must be >= 1");
        }
        Ok(())
    }

    /// Feature labels in emission order.
    pub fn column_names(&self) -> Vec<String> {
        let mut cols: Vec<String> = self.lags.iter().map(|k| format!("lag_close_{k}")).collect();
        cols.extend(self.sma_windows.iter().map(|w| format!("sma_{w}")));
        if self.rsi_period.is_some() {
            cols.push("rsi".into());
        }
        if self.macd.is_some() {
            cols.extend(["macd_line", "macd_signal", "macd_histogram"].map(String::from));
        }
        if self.include_typical_price {
            cols.push("typical_price".into());
        }
        if self.include_liquidity {
            cols.push(VVR_COLUMN.into());
            cols.push(VWAP_COLUMN.into());
        }
        cols
    }

    pub fn hash(&self) -> String {
        content_hash(self)
    }

    /// Number of leading bars without a fully defined row.
    pub fn warmup(&self) -> usize {
        let mut w = *self.lags.last().unwrap_or(&0);
        if let Some(&max_sma) = self.sma_windows.iter().max() {
            w = w.max(max_sma - 1);
        }
        if let Some(p) = self.rsi_period {
            w = w.max(p);
        }
        if let Some(m) = self.macd {
            w = w.max(m.slow + m.signal - 2);
        }
        if self.include_liquidity {
            if let VwapWindow::Rolling(n) = self.vwap_window {
                w = w.max(n - 1);
            }
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub timestamp: DateTime<Utc>,
    /// Values in `FeatureMatrix::column_names` order.
    pub values: Vec<f64>,
    pub target_close: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub column_names: Vec<String>,
    pub rows: Vec<FeatureRow>,
    pub warmup_dropped: usize,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// Values of a feature column, or of the target via [`TARGET_COLUMN`].
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        if name == TARGET_COLUMN {
            return Ok(self.targets());
        }
        let j = self
            .column_index(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        Ok(self.rows.iter().map(|r| r.values[j]).collect())
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target_close).collect()
    }

    pub fn timestamps(&self) -> Vec<DateTime<Utc>> {
        self.rows.iter().map(|r| r.timestamp).collect()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> FeatureMatrix {
        FeatureMatrix {
            column_names: self.column_names.clone(),
            rows: self.rows[range].to_vec(),
            warmup_dropped: self.warmup_dropped,
        }
    }

    /// Copy without the named columns; used to derive the liquidity-off arm.
    pub fn without_columns(&self, drop: &[&str]) -> FeatureMatrix {
        let keep: Vec<usize> = (0..self.n_features())
            .filter(|&j| !drop.contains(&self.column_names[j].as_str()))
            .collect();
        FeatureMatrix {
            column_names: keep.iter().map(|&j| self.column_names[j].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| FeatureRow {
                    timestamp: r.timestamp,
                    values: keep.iter().map(|&j| r.values[j]).collect(),
                    target_close: r.target_close,
                })
                .collect(),
            warmup_dropped: self.warmup_dropped,
        }
    }
}

/// Every configured column for every bar, `None` while undefined.
pub fn feature_columns(series: &CandleSeries, config: &FeatureConfig) -> Result<Vec<Vec<Option<f64>>>> {
    config.validate()?;
    let candles = &series.candles;
    let closes = series.closes();
    let n = candles.len();
    let mut columns: Vec<Vec<Option<f64>>> = Vec::new();

    for &k in &config.lags {
        columns.push((0..n).map(|i| (i >= k).then(|| closes[i - k])).collect());
    }
    for &w in &config.sma_windows {
        columns.push(compute_sma(&closes, w));
    }
    if let Some(p) = config.rsi_period {
        columns.push(compute_rsi(&closes, p));
    }
    if let Some(m) = config.macd {
        let macd = compute_macd(&closes, m.fast, m.slow, m.signal);
        columns.push(macd.line);
        columns.push(macd.signal);
        columns.push(macd.histogram);
    }
    if config.include_typical_price {
        columns.push(candles.iter().map(|c| Some(compute_typical_price(c))).collect());
    }
    if config.include_liquidity {
        columns.push(candles.iter().map(|c| Some(compute_vvr(c, config.epsilon))).collect());
        let vwap = (0..n)
            .map(|i| {
                let start = match config.vwap_window {
                    VwapWindow::Rolling(w) if i + 1 < w => return Ok(None),
                    VwapWindow::Rolling(w) => i + 1 - w,
                    VwapWindow::Cumulative => 0,
                };
                compute_vwap(&candles[start..=i], config.vwap_volume).map(Some)
            })
            .collect::<Result<Vec<_>>>()?;
        columns.push(vwap);
    }
    Ok(columns)
}

/// Builds the supervised table: one row per bar after the warm-up prefix,
/// with `target_close` equal to that bar's close.
pub fn build_feature_matrix(series: &CandleSeries, config: &FeatureConfig) -> Result<FeatureMatrix> {
    let columns = feature_columns(series, config)?;
    let warmup = config.warmup();
    let n = series.len();
    if n <= warmup {
        return Err(Error::SeriesTooShort {
            needed: warmup + 1,
            got: n,
        });
    }
    let rows = (warmup..n)
        .map(|i| {
            let values = columns
                .iter()
                .map(|col| col[i].filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "feature undefined or non-finite at bar {}",
                        series.candles[i].timestamp
                    ))
                })?;
            Ok(FeatureRow {
                timestamp: series.candles[i].timestamp,
                values,
                target_close: series.candles[i].close,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix {
        column_names: config.column_names(),
        rows,
        warmup_dropped: warmup,
    })
}
