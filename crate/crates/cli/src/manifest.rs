use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;

/// Record of one command run, written beside its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: Option<String>,
    /// SHA-256 of the scenario file as read.
    pub scenario_hash: Option<String>,
    pub seed: Option<u64>,
    pub budget: Option<u64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    /// Output files relative to the output directory.
    pub outputs: Vec<String>,
    pub version: String,
}

pub fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(command: &str, started_unix: f64) -> Self {
        RunManifest {
            command: command.to_string(),
            scenario: None,
            scenario_hash: None,
            seed: None,
            budget: None,
            started_unix,
            finished_unix: started_unix,
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn with_outputs(mut self, dir: &Path, paths: &[PathBuf]) -> Self {
        self.outputs = paths
            .iter()
            .map(|p| p.strip_prefix(dir).unwrap_or(p).display().to_string())
            .collect();
        self
    }

    /// Writes `manifest.json` through a temporary file and a rename, so a
    /// reader never sees a partial manifest.
    pub fn write(mut self, dir: &Path) -> anyhow::Result<PathBuf> {
        self.finished_unix = now();
        let path = dir.join("manifest.json");
        let tmp = dir.join(".manifest.json.tmp");
        let text = serde_json::to_string_pretty(&self)?;
        fs::write(&tmp, text + "\n").with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &path).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
