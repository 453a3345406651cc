//! OHLCV candle series: loading, validation, gap handling and distribution
//! summaries.

mod csv_io;
mod gaps;
mod summary;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use csv_io::{format_timestamp, load_candles, parse_timestamp, read_candles, write_canonical_csv, CsvSchema};
pub use gaps::{fill_gaps, find_gaps, GapPolicy};
pub use summary::{summarize, FieldSummary, Histogram, SeriesSummary, RIGHT_SKEW_THRESHOLD};

/// One OHLCV bar. `timestamp` is the bar open time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candle {
    pub timestamp: DateTime<Utc>,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    /// Traded quantity in base-asset units.
    pub volume_base: f64,
    /// Traded quantity in quote-currency units.
    pub volume_quote: f64,
}

impl Candle {
    /// Checks the bar invariants, returning a short reason on violation.
    pub fn validate(&self) -> std::result::Result<(), &'static str> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite()) {
            return Err("non-finite price");
        }
        if !self.volume_base.is_finite() || !self.volume_quote.is_finite() {
            return Err("non-finite volume");
        }
        if prices.iter().any(|&p| p <= 0.0) {
            return Err("non-positive price");
        }
        if self.volume_base < 0.0 || self.volume_quote < 0.0 {
            return Err("negative volume");
        }
        if self.low > self.high {
            return Err("low above high");
        }
        if self.open < self.low || self.open > self.high {
            return Err("open outside [low, high]");
        }
        if self.close < self.low || self.close > self.high {
            return Err("close outside [low, high]");
        }
        Ok(())
    }

    /// Flat bar at `price` with zero volume, used to fill missing periods.
    pub fn flat(timestamp: DateTime<Utc>, price: f64) -> Self {
        Candle {
            timestamp,
            open: price,
            high: price,
            low: price,
            close: price,
            volume_base: 0.0,
            volume_quote: 0.0,
        }
    }
}

/// A run of missing bars between two consecutive candles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub after: DateTime<Utc>,
    pub before: DateTime<Utc>,
    pub missing_bars: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandleSeries {
    pub symbol: String,
    /// Bar duration in seconds.
    pub interval_secs: i64,
    pub candles: Vec<Candle>,
    /// Gaps left in place (drop policy) are recorded here.
    pub gaps: Vec<Gap>,
}

impl CandleSeries {
    pub fn len(&self) -> usize {
        self.candles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candles.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.candles.iter().map(|c| c.close).collect()
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.candles
            .windows(2)
            .all(|w| w[0].timestamp < w[1].timestamp)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub duplicates_dropped: usize,
    pub gaps_found: usize,
    pub invalid_rows: usize,
    /// File line numbers (header is line 1) of the first rejected rows.
    pub invalid_lines: Vec<usize>,
}

impl IngestReport {
    pub fn is_balanced(&self) -> bool {
        self.rows_kept + self.duplicates_dropped + self.invalid_rows == self.rows_read
    }
}
