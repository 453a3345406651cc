use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureConfig, FeatureMatrix, FeatureRow, TARGET_COLUMN};
use crate::error::{Error, Result};
use crate::hashing::content_hash;
use crate::market_data::parse_timestamp;

/// JSON sidecar describing a feature CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSchema {
    pub columns: Vec<String>,
    pub feature_config: FeatureConfig,
    pub warmup_dropped: usize,
    /// Hash over `columns` and `feature_config`.
    pub schema_hash: String,
}

impl FeatureSchema {
    pub fn new(matrix: &FeatureMatrix, config: &FeatureConfig) -> Self {
        FeatureSchema {
            columns: matrix.column_names.clone(),
            feature_config: config.clone(),
            warmup_dropped: matrix.warmup_dropped,
            schema_hash: schema_hash(&matrix.column_names, config),
        }
    }
}

pub(crate) fn schema_hash(columns: &[String], config: &FeatureConfig) -> String {
    content_hash(&(columns, config))
}

/// Header `timestamp,<feature columns>,target_close`.
pub fn write_feature_csv<W: std::io::Write>(matrix: &FeatureMatrix, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["timestamp".to_string()];
    header.extend(matrix.column_names.iter().cloned());
    header.push(TARGET_COLUMN.to_string());
    wtr.write_record(&header)?;
    for row in &matrix.rows {
        let mut rec = vec![row
            .timestamp
            .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)];
        rec.extend(row.values.iter().map(f64::to_string));
        rec.push(row.target_close.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Reads a feature CSV, checking its header against `schema`.
pub fn read_feature_csv(path: &Path, schema: &FeatureSchema) -> Result<FeatureMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut expected = vec!["timestamp".to_string()];
    expected.extend(schema.columns.iter().cloned());
    expected.push(TARGET_COLUMN.to_string());
    if header != expected {
        return Err(Error::SchemaMismatch(format!(
            "feature header {header:?} does not match schema {expected:?}"
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = || Error::MalformedHeader(format!("unparseable feature row at line {}", i + 2));
        let timestamp = parse_timestamp(&rec[0]).ok_or_else(bad)?;
        let mut nums = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<f64>>>()?;
        let target_close = nums.pop().ok_or_else(bad)?;
        rows.push(FeatureRow {
            timestamp,
            values: nums,
            target_close,
        });
    }
    Ok(FeatureMatrix {
        column_names: schema.columns.clone(),
        rows,
        warmup_dropped: schema.warmup_dropped,
    })
}
