//! Run manifests: enough to repeat a command exactly.

use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::AppResult;
use crate::io::{read_json, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub varheat: String,
    pub varheat_core: String,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            varheat: env!("CARGO_PKG_VERSION").to_string(),
            varheat_core: varheat_core::VERSION.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Command line as given, program name excluded.
    pub args: Vec<String>,
    pub seed: u64,
    /// SHA-256 of the canonical JSON of `config`.
    pub spec_hash: String,
    pub started_at: String,
    pub duration_s: f64,
    /// Files written, relative to the run directory.
    pub outputs: Vec<String>,
    /// Effective configuration after flags, config file and defaults.
    pub config: serde_json::Value,
    pub versions: Versions,
}

/// Hex SHA-256 of `value` serialized with sorted keys.
pub fn config_hash(value: &serde_json::Value) -> String {
    // serde_json maps are ordered by key, so this is canonical
    let bytes = serde_json::to_vec(value).expect("JSON values always serialize");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Manifest {
    pub fn write(&self, dir: &FsPath) -> AppResult<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn read(file: &FsPath) -> AppResult<Self> {
        read_json(file)
    }
}
