//! Versioned JSON checkpoint container.
//!
//! ```json
//! { "format": "tppd-checkpoint", "version": 1, "kind": "<payload kind>", "payload": { ... } }
//! ```
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so a save/load cycle is bit-exact for every finite `f64`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT: &str = "tppd-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub payload: T,
}

pub fn to_string<T: Serialize>(kind: &str, payload: &T) -> Result<String> {
    let ck = Checkpoint {
        format: FORMAT.to_string(),
        version: VERSION,
        kind: kind.to_string(),
        payload,
    };
    serde_json::to_string_pretty(&ck).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn from_str<T: DeserializeOwned>(kind: &str, text: &str) -> Result<T> {
    let ck: Checkpoint<T> =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if ck.format != FORMAT || ck.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported container {} v{}",
            ck.format, ck.version
        )));
    }
    if ck.kind != kind {
        return Err(Error::Checkpoint(format!(
            "expected `{kind}`, found `{}`",
            ck.kind
        )));
    }
    Ok(ck.payload)
}

pub fn save<T: Serialize>(path: &Path, kind: &str, payload: &T) -> Result<()> {
    let text = to_string(kind, payload)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(kind, &text)
}
