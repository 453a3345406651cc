//! Content hashes and seed derivation shared by manifests and reports.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn bytes_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 over the canonical JSON form of `value` (object keys sorted).
pub fn content_hash<T: Serialize>(value: &T) -> String {
    bytes_hash(canonical_json(value).as_bytes())
}

pub fn canonical_json<T: Serialize>(value: &T) -> String {
    // serde_json::Value keeps object keys in a BTreeMap, so this is order-stable.
    let v = serde_json::to_value(value).expect("serializable value");
    v.to_string()
}

/// Independent per-stage seed derived from the run seed and a stage label.
pub fn substream_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
