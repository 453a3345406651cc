//! Versioned, checksummed JSON model files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Family, TrainedModel};
use crate::dataset::Scaler;
use crate::error::{Error, Result};
use crate::features::FeatureSchema;
use crate::fsutil::{read_to_string, write_atomic};
use crate::hashing::{bytes_hash, canonical_json};

pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to predict from raw feature rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelPayload {
    pub format_version: u32,
    pub family: Family,
    pub seed: u64,
    pub feature_schema: FeatureSchema,
    pub scaler: Scaler,
    /// Hash of the training bundle manifest.
    pub manifest_hash: String,
    pub model: TrainedModel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    /// SHA-256 of the canonical JSON of `payload`.
    checksum: String,
    payload: serde_json::Value,
}

pub fn encode_model(payload: &ModelPayload) -> Result<String> {
    let value = serde_json::to_value(payload)?;
    let env = Envelope {
        checksum: bytes_hash(canonical_json(&value).as_bytes()),
        payload: value,
    };
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    Ok(s)
}

pub fn decode_model(text: &str) -> Result<ModelPayload> {
    let env: Envelope = serde_json::from_str(text)?;
    let actual = bytes_hash(canonical_json(&env.payload).as_bytes());
    if actual != env.checksum {
        return Err(Error::Integrity(format!(
            "model checksum mismatch (stored {}, computed {actual})",
            env.checksum
        )));
    }
    let version = env.payload.get("format_version").and_then(|v| v.as_u64());
    if version != Some(FORMAT_VERSION as u64) {
        return Err(Error::Integrity(format!(
            "unsupported model format version {version:?} (expected {FORMAT_VERSION})"
        )));
    }
    let payload: ModelPayload = serde_json::from_value(env.payload)?;
    if payload.family != payload.model.family() {
        return Err(Error::Integrity("family tag does not match the stored model".into()));
    }
    Ok(payload)
}

pub fn save_model(path: &Path, payload: &ModelPayload) -> Result<()> {
    write_atomic(path, encode_model(payload)?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<ModelPayload> {
    decode_model(&read_to_string(path)?)
}
