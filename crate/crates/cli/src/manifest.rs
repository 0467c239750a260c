//! Per-run manifest: what ran, with which configuration, on which files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

impl Artifact {
    pub fn hash(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self { path: path.to_path_buf(), sha256: hex::encode(Sha256::digest(&bytes)) })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument list, so the run can be repeated verbatim.
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    /// Command-specific figures such as accuracies.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub results: serde_json::Value,
    pub started_unix: u64,
    pub wall_clock_secs: f64,
}

/// Collects a manifest while a command runs.
pub struct Recorder {
    command: &'static str,
    started_unix: u64,
    clock: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn start(command: &'static str) -> Self {
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Self { command, started_unix, clock: Instant::now(), inputs: Vec::new(), outputs: Vec::new() }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Writes `contents` to `path` and records it as an output.
    pub fn write(&mut self, path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    pub fn finish(self, manifest_path: &Path, config: serde_json::Value, seed: u64, results: serde_json::Value) -> Result<RunManifest> {
        let hash_all = |paths: &[PathBuf]| paths.iter().map(|p| Artifact::hash(p)).collect::<Result<Vec<_>>>();
        let manifest = RunManifest {
            command: self.command.to_string(),
            args: std::env::args().collect(),
            config,
            seed,
            inputs: hash_all(&self.inputs)?,
            outputs: hash_all(&self.outputs)?,
            results,
            started_unix: self.started_unix,
            wall_clock_secs: self.clock.elapsed().as_secs_f64(),
        };
        fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing {}", manifest_path.display()))?;
        Ok(manifest)
    }
}

/// `out/model.json` -> `out/model.manifest.json`.
pub fn beside(path: &Path) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.manifest.json"))
}
