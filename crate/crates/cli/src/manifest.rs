use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Written into the output directory before any results.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: String,
    pub config_fingerprint: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(subcommand: &str, config_path: Option<&Path>, config_fingerprint: String, seed: u64, out: &Path) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            config_path: config_path.map_or_else(|| "<bundled>".to_string(), |p| p.display().to_string()),
            config_fingerprint,
            seed,
            output_dir: out.to_path_buf(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn write(&self) -> Result<()> {
        fs::create_dir_all(&self.output_dir)
            .with_context(|| format!("creating {}", self.output_dir.display()))?;
        write_json(&self.output_dir.join("manifest.json"), self)
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
