//! Run manifests written next to every artifact.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    /// Arguments after the program name; replaying them reproduces the
    /// artifacts.
    pub argv: Vec<String>,
    /// Every flag after defaults and environment were applied.
    pub flags: serde_json::Value,
    pub dataset_digest: String,
    pub version: String,
    pub wall_time_seconds: f64,
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn new<T: Serialize>(
        command: &str,
        argv: &[String],
        flags: &T,
        dataset_digest: &str,
        start: Instant,
        outputs: Vec<PathBuf>,
    ) -> Self {
        Self {
            command: command.to_string(),
            argv: argv.to_vec(),
            flags: serde_json::to_value(flags).unwrap_or(serde_json::Value::Null),
            dataset_digest: dataset_digest.to_string(),
            version: nask::VERSION.to_string(),
            wall_time_seconds: start.elapsed().as_secs_f64(),
            outputs,
        }
    }

    /// `<artifact>.manifest.json`.
    pub fn path_for(artifact: &Path) -> PathBuf {
        let mut name = artifact.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn write_next_to(&self, artifact: &Path) -> anyhow::Result<PathBuf> {
        let path = Self::path_for(artifact);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// Replaces the value of `flag` (either `--flag value` or `--flag=value`).
pub fn replace_flag(argv: &mut [String], flag: &str, value: &str) -> anyhow::Result<()> {
    let prefix = format!("{flag}=");
    for i in 0..argv.len() {
        if argv[i] == flag && i + 1 < argv.len() {
            argv[i + 1] = value.to_string();
            return Ok(());
        }
        if argv[i].starts_with(&prefix) {
            argv[i] = format!("{prefix}{value}");
            return Ok(());
        }
    }
    anyhow::bail!("recorded command has no {flag} flag")
}
