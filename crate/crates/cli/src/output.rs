//! Stage output directories and their manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use infdecomp_core::text::sha256_hex;
use serde::Serialize;

use crate::config::LoadedConfig;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub stage: String,
    /// Command line that reproduces the outputs.
    pub command: Vec<String>,
    pub tool_version: String,
    pub core_version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub resolved_config: serde_json::Value,
    /// Input path (as configured) to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    /// Output path (relative to the stage directory) to SHA-256.
    pub outputs: BTreeMap<String, String>,
}

/// Collects one stage's files and writes `manifest.json` next to them.
pub struct StageOutput {
    pub stage: String,
    pub dir: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

impl StageOutput {
    pub fn new(cfg: &LoadedConfig, stage: &str) -> Self {
        Self {
            stage: stage.to_string(),
            dir: cfg.output_dir().join(stage),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Records an input file by its configured path.
    pub fn input(&mut self, cfg: &LoadedConfig, configured: &Path) -> Result<()> {
        let bytes = std::fs::read(cfg.resolve(configured))
            .with_context(|| format!("reading {}", configured.display()))?;
        self.inputs
            .insert(configured.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn finish(self, cfg: &LoadedConfig, command: &str) -> Result<PathBuf> {
        let resolved = serde_json::to_value(&cfg.config)?;
        let manifest = Manifest {
            stage: self.stage.clone(),
            command: vec![
                "infdecomp".into(),
                "--config".into(),
                cfg.config_path.display().to_string(),
                "--seed".into(),
                cfg.config.seed.to_string(),
                "--out".into(),
                cfg.output_dir().display().to_string(),
                "--cache-dir".into(),
                cfg.cache_dir().display().to_string(),
                command.into(),
            ],
            tool_version: env!("CARGO_PKG_VERSION").into(),
            core_version: infdecomp_core::VERSION.into(),
            seed: cfg.config.seed,
            config_sha256: sha256_hex(serde_json::to_string(&resolved)?.as_bytes()),
            resolved_config: resolved,
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let path = self.dir.join("manifest.json");
        let mut s = serde_json::to_string_pretty(&manifest)?;
        s.push('\n');
        write_atomic(&path, s.as_bytes())?;
        Ok(path)
    }
}
