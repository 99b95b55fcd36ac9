use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use svdnet::config::RunConfig;
use svdnet::eval::SyntheticConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Where a run's dataset came from. A generated dataset is also written to
/// disk, so `path` is always loadable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSource {
    pub path: PathBuf,
    pub generated_from: Option<SyntheticConfig>,
}

/// Everything needed to repeat a run, written before any training starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub data: DataSource,
    /// Artifact name to path, all under the output directory.
    pub artifacts: BTreeMap<String, PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, data: DataSource) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: config.seed,
            config: config.clone(),
            data,
            artifacts: BTreeMap::new(),
        }
    }

    pub fn artifact(mut self, name: &str, path: PathBuf) -> Self {
        self.artifacts.insert(name.to_string(), path);
        self
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self)?;
        fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Fails if any listed artifact is missing.
    pub fn check_artifacts(&self) -> Result<()> {
        for (name, path) in &self.artifacts {
            anyhow::ensure!(path.exists(), "artifact '{name}' was not written: {}", path.display());
        }
        Ok(())
    }
}
