//! Run manifest: everything needed to repeat a run. Two runs with equal
//! manifests produce byte-identical outputs.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeRecord {
    /// File path, or `builtin:cs5`.
    pub source: String,
    /// Hash of `resolved_toml`.
    pub sha256: String,
    /// Scheme after command-line overrides, as TOML.
    pub resolved_toml: String,
}

impl SchemeRecord {
    pub fn new(source: String, resolved_toml: String) -> Self {
        SchemeRecord {
            source,
            sha256: sha256_hex(resolved_toml.as_bytes()),
            resolved_toml,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub parameters: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeRecord>,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
    pub summary: Value,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
