//! Artifact persistence and the run manifest.

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiments::Artifact;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Everything needed to check a run: no timestamps, paths or thread counts.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub experiment: String,
    pub seed: u64,
    pub config_sha256: String,
    pub files: Vec<FileEntry>,
    /// SHA-256 over `name NUL sha256 LF` for every file, in listed order.
    pub content_hash: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Prepends the effective config and appends the manifest.
pub fn finalize(config: &ExperimentConfig, mut artifacts: Vec<Artifact>) -> Vec<Artifact> {
    let config_text = config.to_toml();
    let config_sha256 = sha256_hex(config_text.as_bytes());
    artifacts.insert(0, Artifact { name: CONFIG_FILE.into(), bytes: config_text.into_bytes() });
    let files: Vec<FileEntry> =
        artifacts.iter().map(|a| FileEntry { name: a.name.clone(), bytes: a.bytes.len(), sha256: sha256_hex(&a.bytes) }).collect();
    let mut joined = Vec::new();
    for f in &files {
        joined.extend_from_slice(f.name.as_bytes());
        joined.push(0);
        joined.extend_from_slice(f.sha256.as_bytes());
        joined.push(b'\n');
    }
    let experiment = serde_json::to_value(config.experiment).expect("kind serializes");
    let manifest = Manifest {
        tool: format!("levyheat {}", env!("CARGO_PKG_VERSION")),
        experiment: experiment.as_str().unwrap_or_default().to_string(),
        seed: config.sampling.seed,
        config_sha256,
        files,
        content_hash: sha256_hex(&joined),
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    artifacts.push(Artifact { name: MANIFEST_FILE.into(), bytes });
    artifacts
}

pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    let io = |path: &Path, source| CliError::Io { path: path.display().to_string(), source };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.bytes).map_err(|e| io(&path, e))?;
    }
    Ok(())
}
