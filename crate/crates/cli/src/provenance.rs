//! Artifact sidecars: `<artifact>.prov.json` beside every output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use attrmine_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub step: String,
    pub version: String,
    pub artifact: String,
    pub sha256: String,
    pub seed: Option<u64>,
    /// Step arguments that are not part of the config.
    pub args: BTreeMap<String, String>,
    /// Input name → sha256.
    pub inputs: BTreeMap<String, String>,
    pub config: PipelineConfig,
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a file, or of a directory as its sorted file names and contents.
pub fn sha256_path(path: &Path) -> Result<String> {
    if !path.is_dir() {
        return Ok(sha256_bytes(&std::fs::read(path)?));
    }
    let mut names: Vec<String> = std::fs::read_dir(path)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    let mut h = Sha256::new();
    for name in names {
        h.update(name.as_bytes());
        h.update([0]);
        let bytes = std::fs::read(path.join(&name))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".prov.json");
    artifact.with_file_name(name)
}

pub fn read_sidecar(artifact: &Path) -> Result<Provenance> {
    let path = sidecar_path(artifact);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Format(format!("{}: missing provenance ({e})", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Checks an upstream artifact against its sidecar and returns its digest.
pub fn verify(artifact: &Path) -> Result<String> {
    if !artifact.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} not found; run the producing step first", artifact.display()),
        )));
    }
    let prov = read_sidecar(artifact)?;
    let actual = sha256_path(artifact)?;
    if actual != prov.sha256 {
        return Err(Error::Format(format!(
            "checksum mismatch for {}: recorded {}, found {}",
            artifact.display(),
            prov.sha256,
            actual
        )));
    }
    Ok(actual)
}

pub fn write_sidecar(artifact: &Path, prov: &Provenance) -> Result<()> {
    let mut text = serde_json::to_string_pretty(prov).map_err(std::io::Error::from)?;
    text.push('\n');
    std::fs::write(sidecar_path(artifact), text)?;
    Ok(())
}
