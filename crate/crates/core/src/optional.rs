//! Serde adapter writing `None` as the string `"none"`, so optional
//! settings survive formats without a null (TOML).

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Repr<T> {
    Value(T),
    Word(String),
}

pub fn serialize<T: Serialize, S: Serializer>(value: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
    match value {
        Some(v) => v.serialize(s),
        None => s.serialize_str("none"),
    }
}

pub fn deserialize<'de, T: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<Option<T>, D::Error> {
    match Repr::<T>::deserialize(d)? {
        Repr::Value(v) => Ok(Some(v)),
        Repr::Word(w) if w == "none" || w == "off" => Ok(None),
        Repr::Word(w) => Err(serde::de::Error::custom(format!("expected a value or \"none\", got {w:?}"))),
    }
}
