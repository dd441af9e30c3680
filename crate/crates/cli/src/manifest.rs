//! Artifact writing and the run manifest.

use std::fs;
use std::io::Write;
use std::path::Path;

use credlab::experiments::output::Artifact;
use credlab::ExperimentConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Markets;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct ArtifactEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub exit_code: u8,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub status: &'static str,
    pub seed: Option<u64>,
    pub config: Option<ExperimentConfig>,
    pub markets: Option<Markets>,
    pub workers: usize,
    pub work_units: usize,
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<ArtifactEntry>,
    pub error: Option<ErrorRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Writes every artifact, returning their manifest entries.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> std::io::Result<Vec<ArtifactEntry>> {
    fs::create_dir_all(dir)?;
    artifacts
        .iter()
        .map(|a| {
            write_atomic(&dir.join(&a.name), &a.bytes)?;
            Ok(ArtifactEntry { name: a.name.clone(), sha256: sha256_hex(&a.bytes), bytes: a.bytes.len() })
        })
        .collect()
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
    text.push('\n');
    write_atomic(&dir.join(MANIFEST), text.as_bytes())
}
