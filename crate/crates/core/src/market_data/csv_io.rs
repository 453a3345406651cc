use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::{gaps::find_gaps, Candle, CandleSeries, IngestReport};
use crate::error::{Error, Result};

const MAX_REPORTED_LINES: usize = 20;
const DEFAULT_INTERVAL_SECS: i64 = 86_400;

/// Column mapping for an input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub symbol: String,
    pub timestamp: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
    pub volume_base: Option<String>,
    pub volume_quote: Option<String>,
    /// Bar duration in seconds; inferred from the most common spacing when absent.
    pub interval_secs: Option<i64>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            symbol: "XRP/USDT".to_string(),
            timestamp: "timestamp".to_string(),
            open: "open".to_string(),
            high: "high".to_string(),
            low: "low".to_string(),
            close: "close".to_string(),
            volume_base: Some("volume_base".to_string()),
            volume_quote: Some("volume_quote".to_string()),
            interval_secs: None,
        }
    }
}

struct ColumnIndex {
    timestamp: usize,
    open: usize,
    high: usize,
    low: usize,
    close: usize,
    volume_base: Option<usize>,
    volume_quote: Option<usize>,
}

impl ColumnIndex {
    fn resolve(headers: &csv::StringRecord, schema: &CsvSchema) -> Result<Self> {
        let lookup: HashMap<&str, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim(), i))
            .collect();
        let need = |name: &str| {
            lookup
                .get(name)
                .copied()
                .ok_or_else(|| Error::MalformedHeader(format!("missing column `{name}`")))
        };
        let optional = |name: &Option<String>| -> Result<Option<usize>> {
            match name {
                None => Ok(None),
                Some(n) => need(n).map(Some),
            }
        };
        let index = ColumnIndex {
            timestamp: need(&schema.timestamp)?,
            open: need(&schema.open)?,
            high: need(&schema.high)?,
            low: need(&schema.low)?,
            close: need(&schema.close)?,
            volume_base: optional(&schema.volume_base)?,
            volume_quote: optional(&schema.volume_quote)?,
        };
        if index.volume_base.is_none() && index.volume_quote.is_none() {
            return Err(Error::MalformedHeader(
                "schema maps no volume column".to_string(),
            ));
        }
        Ok(index)
    }

    fn parse(&self, record: &csv::StringRecord) -> Option<Candle> {
        let num = |i: usize| record.get(i)?.trim().parse::<f64>().ok();
        let timestamp = parse_timestamp(record.get(self.timestamp)?)?;
        let close = num(self.close)?;
        // A single mapped volume column determines the other through the close.
        let (volume_base, volume_quote) = match (self.volume_base, self.volume_quote) {
            (Some(b), Some(q)) => (num(b)?, num(q)?),
            (Some(b), None) => {
                let b = num(b)?;
                (b, b * close)
            }
            (None, Some(q)) => {
                let q = num(q)?;
                (q / close, q)
            }
            (None, None) => return None,
        };
        Some(Candle {
            timestamp,
            open: num(self.open)?,
            high: num(self.high)?,
            low: num(self.low)?,
            close,
            volume_base,
            volume_quote,
        })
    }
}

/// Parses epoch seconds, RFC 3339, `YYYY-MM-DD HH:MM:SS` or `YYYY-MM-DD`, all as UTC.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(secs) = raw.parse::<i64>() {
        return Utc.timestamp_opt(secs, 0).single();
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(naive.and_utc());
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|naive| naive.and_utc())
}

pub fn load_candles(path: &Path, schema: &CsvSchema) -> Result<(CandleSeries, IngestReport)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_candles(file, schema)
}

/// Reads and canonicalizes a candle CSV from any reader.
pub fn read_candles<R: Read>(reader: R, schema: &CsvSchema) -> Result<(CandleSeries, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::MalformedHeader(e.to_string()))?
        .clone();
    let columns = ColumnIndex::resolve(&headers, schema)?;

    let mut report = IngestReport::default();
    let mut valid: Vec<Candle> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        report.rows_read += 1;
        let line = i + 2;
        let candle = record
            .ok()
            .and_then(|r| columns.parse(&r))
            .filter(|c| c.validate().is_ok());
        match candle {
            Some(c) => valid.push(c),
            None => {
                report.invalid_rows += 1;
                if report.invalid_lines.len() < MAX_REPORTED_LINES {
                    report.invalid_lines.push(line);
                }
            }
        }
    }

    // Stable: among equal timestamps the first file occurrence stays first.
    valid.sort_by_key(|c| c.timestamp);
    let mut candles: Vec<Candle> = Vec::with_capacity(valid.len());
    let mut conflicts = Vec::new();
    for c in valid {
        match candles.last() {
            Some(prev) if prev.timestamp == c.timestamp => {
                if *prev == c {
                    report.duplicates_dropped += 1;
                } else {
                    conflicts.push(c.timestamp.to_rfc3339());
                }
            }
            _ => candles.push(c),
        }
    }
    if !conflicts.is_empty() {
        conflicts.dedup();
        return Err(Error::ConflictingDuplicates(conflicts));
    }
    if candles.is_empty() {
        return Err(Error::NoValidRows);
    }
    // Conflicting rows abort above, so each conflict is never counted as kept.
    report.rows_kept = candles.len();

    let interval_secs = schema
        .interval_secs
        .unwrap_or_else(|| infer_interval(&candles));
    if interval_secs <= 0 {
        return Err(Error::InvalidConfig("interval_secs must be positive".into()));
    }
    let gaps = find_gaps(&candles, interval_secs);
    report.gaps_found = gaps.len();
    Ok((
        CandleSeries {
            symbol: schema.symbol.clone(),
            interval_secs,
            candles,
            gaps,
        },
        report,
    ))
}

/// Most common positive spacing; ties resolve to the smaller spacing.
fn infer_interval(candles: &[Candle]) -> i64 {
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for w in candles.windows(2) {
        *counts
            .entry((w[1].timestamp - w[0].timestamp).num_seconds())
            .or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(delta, _)| delta)
        .unwrap_or(DEFAULT_INTERVAL_SECS)
}

/// Writes `timestamp,open,high,low,close,volume_base,volume_quote` with
/// round-trip float formatting, so reloading reproduces the series exactly.
/// RFC 3339 in UTC with whole seconds and a `Z` suffix.
pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn write_canonical_csv<W: Write>(series: &CandleSeries, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "timestamp",
        "open",
        "high",
        "low",
        "close",
        "volume_base",
        "volume_quote",
    ])?;
    for c in &series.candles {
        wtr.write_record([
            format_timestamp(&c.timestamp),
            c.open.to_string(),
            c.high.to_string(),
            c.low.to_string(),
            c.close.to_string(),
            c.volume_base.to_string(),
            c.volume_quote.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
