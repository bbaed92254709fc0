//! Provenance records written next to every artifact set.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Every flag that influences the output, after defaults are applied.
    pub flags: Value,
    pub seed: u64,
    /// Command-specific facts about the run (sizes, residuals, ...).
    pub summary: Value,
    /// Files written, relative to the manifest's directory.
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, flags: Value, seed: u64) -> Self {
        Self {
            tool: "dgl".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            flags,
            seed,
            summary: Value::Null,
            artifacts: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST), self)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
