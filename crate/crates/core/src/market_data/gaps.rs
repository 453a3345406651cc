use chrono::Duration;
use serde::{Deserialize, Serialize};

use super::{Candle, CandleSeries, Gap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapPolicy {
    /// Insert flat zero-volume bars at the previous close.
    #[default]
    ForwardFillClose,
    /// Leave the gaps in place and record them on the series.
    Drop,
    Error,
}

/// Every consecutive pair whose spacing differs from `interval_secs`.
pub fn find_gaps(candles: &[Candle], interval_secs: i64) -> Vec<Gap> {
    candles
        .windows(2)
        .filter_map(|w| {
            let delta = (w[1].timestamp - w[0].timestamp).num_seconds();
            (delta != interval_secs).then(|| Gap {
                after: w[0].timestamp,
                before: w[1].timestamp,
                missing_bars: (delta - 1).div_euclid(interval_secs),
            })
        })
        .collect()
}

pub fn fill_gaps(series: &CandleSeries, policy: GapPolicy) -> Result<CandleSeries> {
    let gaps = find_gaps(&series.candles, series.interval_secs);
    match policy {
        GapPolicy::Error if !gaps.is_empty() => Err(Error::GapsPresent(gaps.len())),
        GapPolicy::Error | GapPolicy::Drop => Ok(CandleSeries {
            gaps,
            ..series.clone()
        }),
        GapPolicy::ForwardFillClose => {
            let step = Duration::seconds(series.interval_secs);
            let mut candles: Vec<Candle> = Vec::with_capacity(series.len());
            for c in &series.candles {
                if let Some(prev) = candles.last().copied() {
                    let delta = (c.timestamp - prev.timestamp).num_seconds();
                    if delta % series.interval_secs != 0 {
                        return Err(Error::OffGrid(c.timestamp.to_rfc3339()));
                    }
                    let mut t = prev.timestamp + step;
                    while t < c.timestamp {
                        candles.push(Candle::flat(t, prev.close));
                        t += step;
                    }
                }
                candles.push(*c);
            }
            Ok(CandleSeries {
                symbol: series.symbol.clone(),
                interval_secs: series.interval_secs,
                candles,
                gaps: Vec::new(),
            })
        }
    }
}
