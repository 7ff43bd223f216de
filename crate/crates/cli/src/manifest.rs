use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance record written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    /// SHA-256 of `resolved` rendered as compact JSON with sorted keys.
    pub config_digest: String,
    pub seeds: Vec<u64>,
    pub versions: BTreeMap<String, String>,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub wall_clock_s: f64,
    /// Every setting after defaults and overrides, with input file hashes.
    pub resolved: Value,
}

impl RunManifest {
    pub fn save(&self, dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Compute(e.to_string()))?;
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

/// serde_json maps keep keys sorted, so the compact rendering is canonical.
pub fn digest(resolved: &Value) -> String {
    sha256_hex(resolved.to_string().as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("rimnull-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("rimnull-core".to_string(), rimnull_core::VERSION.to_string()),
    ])
}
