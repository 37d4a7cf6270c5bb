//! Run manifest: config and input hashes plus per-stage output hashes.
//! No timestamps or absolute paths, so identical runs give identical manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::LoadedConfig;
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Output path (relative to the output directory) to SHA-256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Effective configuration.
    pub config: Option<serde_json::Value>,
    /// Input path as written in the config to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::stage("manifest", format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

fn read(out: &Path) -> Manifest {
    std::fs::read(out.join(MANIFEST_FILE))
        .ok()
        .and_then(|b| serde_json::from_slice(&b).ok())
        .unwrap_or_default()
}

/// Records a finished stage, merging with whatever earlier stages wrote.
pub fn record_stage(
    out: &Path,
    loaded: Option<&LoadedConfig>,
    seed: u64,
    stage: &str,
    inputs: &[(String, std::path::PathBuf)],
    outputs: &[String],
) -> Result<(), CliError> {
    let mut m = read(out);
    m.tool = env!("CARGO_PKG_NAME").to_string();
    m.version = env!("CARGO_PKG_VERSION").to_string();
    m.seed = seed;
    if let Some(l) = loaded {
        m.config_sha256 = sha256_hex(&l.raw);
        m.config = Some(serde_json::to_value(&l.config).map_err(|e| CliError::stage("manifest", e))?);
    }
    for (label, path) in inputs {
        m.inputs.insert(label.clone(), hash_file(path)?);
    }
    let mut rec = StageRecord::default();
    for rel in outputs {
        rec.outputs.insert(rel.clone(), hash_file(&out.join(rel))?);
    }
    m.stages.insert(stage.to_string(), rec);
    let mut text = serde_json::to_string_pretty(&m).map_err(|e| CliError::stage("manifest", e))?;
    text.push('\n');
    std::fs::write(out.join(MANIFEST_FILE), text).map_err(|e| CliError::stage("manifest", e))
}
