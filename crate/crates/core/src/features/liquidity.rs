//! Volume-to-volatility ratio, typical price and volume-weighted average price.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::Candle;

/// Which traded quantity weights the VWAP.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeField {
    #[default]
    Base,
    Quote,
}

impl VolumeField {
    pub fn of(self, candle: &Candle) -> f64 {
        match self {
            VolumeField::Base => candle.volume_base,
            VolumeField::Quote => candle.volume_quote,
        }
    }
}

/// `volume_base / (high - low + epsilon)`.
pub fn compute_vvr(candle: &Candle, epsilon: f64) -> f64 {
    debug_assert!(epsilon > 0.0);
    candle.volume_base / (candle.high - candle.low + epsilon)
}

/// `(high + low + close) / 3`.
pub fn compute_typical_price(candle: &Candle) -> f64 {
    (candle.high + candle.low + candle.close) / 3.0
}

/// Volume-weighted mean of typical prices over `window`. A window with zero
/// total volume falls back to the unweighted mean of its typical prices.
pub fn compute_vwap(window: &[Candle], volume: VolumeField) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::Empty("vwap window"));
    }
    let (weighted, total) = window.iter().fold((0.0, 0.0), |(pv, v), c| {
        let vol = volume.of(c);
        (pv + compute_typical_price(c) * vol, v + vol)
    });
    if total > 0.0 {
        Ok(weighted / total)
    } else {
        Ok(window.iter().map(compute_typical_price).sum::<f64>() / window.len() as f64)
    }
}
