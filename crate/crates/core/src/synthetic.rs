//! Seeded synthetic OHLCV generators for fixtures and the bundled sample.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::market_data::{Candle, CandleSeries};

const DAY: i64 = 86_400;

fn series(symbol: &str, candles: Vec<Candle>) -> CandleSeries {
    CandleSeries {
        symbol: symbol.to_string(),
        interval_secs: DAY,
        candles,
        gaps: Vec::new(),
    }
}

/// Wraps a bar around `open -> close` with random wicks.
fn bar<R: Rng>(rng: &mut R, ts: DateTime<Utc>, open: f64, close: f64, wick: f64) -> (Candle, f64) {
    let hi = open.max(close) + wick * rng.gen::<f64>();
    let lo = (open.min(close) - wick * rng.gen::<f64>()).max(open.min(close) * 0.5);
    let c = Candle {
        timestamp: ts,
        open,
        high: hi,
        low: lo,
        close,
        volume_base: 0.0,
        volume_quote: 0.0,
    };
    (c, hi - lo)
}

/// Dynamics of [`planted_liquidity_series`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedParams {
    pub level: f64,
    pub amplitude: f64,
    pub period: f64,
    /// AR coefficient of the deviation from the seasonal level.
    pub phi: f64,
    /// Effect on the next close of moving VVR from the bottom to the top of its range.
    pub vvr_effect: f64,
    pub noise: f64,
    pub vvr_min: f64,
    pub vvr_max: f64,
}

impl Default for PlantedParams {
    fn default() -> Self {
        PlantedParams {
            level: 1.0,
            amplitude: 0.25,
            period: 120.0,
            phi: 0.85,
            vvr_effect: 0.08,
            noise: 0.015,
            vvr_min: 50.0,
            vvr_max: 500.0,
        }
    }
}

/// Daily bars whose next close is a seasonal AR(1) in lagged closes plus a
/// term linear in the current bar's VVR.
///
/// Each bar's VVR is drawn uniformly and its volume set to
/// `vvr * (high - low + 1e-6)`, so the VVR feature recovers the draw.
pub fn planted_liquidity_series(n: usize, seed: u64, p: &PlantedParams) -> CandleSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
    let level = |t: usize| p.level + p.amplitude * (std::f64::consts::TAU * t as f64 / p.period).sin();
    let mut candles = Vec::with_capacity(n);
    let mut prev_close = level(0);
    let mut close = level(0);
    for t in 0..n {
        let ts = start + Duration::days(t as i64);
        let (mut c, range) = bar(&mut rng, ts, prev_close, close, 0.02);
        let vvr = rng.gen_range(p.vvr_min..p.vvr_max);
        c.volume_base = vvr * (range + 1e-6);
        c.volume_quote = c.volume_base * (c.high + c.low + c.close) / 3.0;
        candles.push(c);

        let u = (vvr - p.vvr_min) / (p.vvr_max - p.vvr_min) - 0.5;
        let eps: f64 = rng.sample(StandardNormal);
        let next = level(t + 1) + p.phi * (close - level(t)) + p.vvr_effect * u + p.noise * eps;
        prev_close = close;
        close = next;
    }
    series("SYN/PLANTED", candles)
}

/// Daily bars following an AR(1) around a linear trend.
pub fn ar_trend_series(n: usize, seed: u64, slope: f64, phi: f64, noise: f64) -> CandleSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
    let trend = |t: usize| 1.0 + slope * t as f64;
    let mut dev = 0.0;
    let mut prev_close = trend(0);
    let mut candles = Vec::with_capacity(n);
    for t in 0..n {
        let close = trend(t) + dev;
        let (mut c, _) = bar(&mut rng, start + Duration::days(t as i64), prev_close, close, 0.01);
        c.volume_base = rng.gen_range(1_000.0..5_000.0);
        c.volume_quote = c.volume_base * close;
        candles.push(c);
        let eps: f64 = rng.sample(StandardNormal);
        dev = phi * dev + noise * eps;
        prev_close = close;
    }
    series("SYN/TREND", candles)
}

/// Piecewise log-linear anchor path (day offset, price) for the sample.
const XRP_ANCHORS: [(i64, f64); 14] = [
    (0, 1.75),
    (40, 1.05),
    (120, 0.62),
    (300, 0.44),
    (365, 0.36),
    (540, 0.42),
    (730, 0.21),
    (900, 0.24),
    (1050, 0.31),
    (1190, 0.55),
    (1200, 1.45),
    (1330, 0.75),
    (1420, 1.15),
    (1825, 0.34),
];

fn anchor_log_price(day: i64) -> f64 {
    let i = XRP_ANCHORS.iter().rposition(|&(d, _)| d <= day).unwrap_or(0);
    if i + 1 >= XRP_ANCHORS.len() {
        return XRP_ANCHORS[i].1.ln();
    }
    let (d0, p0) = XRP_ANCHORS[i];
    let (d1, p1) = XRP_ANCHORS[i + 1];
    let w = (day - d0) as f64 / (d1 - d0) as f64;
    p0.ln() * (1.0 - w) + p1.ln() * w
}

/// Daily 2018-2022 bars shaped like a large-cap altcoin: closes mostly
/// between 0.25 and 0.5 with a right tail toward 1.75, and heavy-tailed
/// volume that rises with the size of the move.
pub fn xrp_like_daily(seed: u64) -> CandleSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Utc.with_ymd_and_hms(2018, 1, 1, 0, 0, 0).unwrap();
    let end = Utc.with_ymd_and_hms(2022, 12, 31, 0, 0, 0).unwrap();
    let days = (end - start).num_days();
    let mut dev = 0.0;
    let mut prev_close = XRP_ANCHORS[0].1;
    let mut candles = Vec::with_capacity(days as usize + 1);
    for d in 0..=days {
        let z: f64 = rng.sample(StandardNormal);
        dev = 0.9 * dev + 0.035 * z;
        let close = (anchor_log_price(d) + dev).exp();
        let ret = (close / prev_close).ln().abs();
        let (mut c, _) = bar(&mut rng, start + Duration::days(d), prev_close, close, 0.04 * close);
        let shock: f64 = rng.sample(StandardNormal);
        c.volume_base = (19.5 + 0.6 * shock + 8.0 * ret).exp();
        c.volume_quote = c.volume_base * (c.high + c.low + c.close) / 3.0;
        candles.push(c);
        prev_close = close;
    }
    series("XRP/USDT", candles)
}
