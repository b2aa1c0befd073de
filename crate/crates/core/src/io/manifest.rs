use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{EitError, Result};

/// SHA-256 of the compact JSON form of `value`. Object keys are sorted, so
/// the hash does not depend on field order in the source document.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let canonical = serde_json::to_string(&serde_json::to_value(value)?)?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Directory name derived from a config hash.
pub fn run_dir_name(hash: &str) -> String {
    format!("run-{}", &hash[..hash.len().min(16)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Provenance record written next to the outputs of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub versions: Vec<(String, String)>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub timings: Vec<StageTiming>,
}

impl RunManifest {
    pub fn new(config_hash: String) -> Self {
        Self {
            config_hash,
            versions: vec![("eitloc".into(), env!("CARGO_PKG_VERSION").into())],
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn time(&mut self, stage: &str, seconds: f64) {
        self.timings.push(StageTiming { stage: stage.into(), seconds });
    }

    /// Writes the manifest as JSON after checking that every listed file exists.
    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(missing) = self.inputs.iter().chain(&self.outputs).find(|p| !p.is_file()) {
            return Err(EitError::Input(format!("manifest refers to missing file {}", missing.display())));
        }
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
