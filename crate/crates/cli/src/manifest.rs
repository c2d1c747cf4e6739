//! Output directories and the `run.json` manifest written into each one.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mdrobust::IQMeasurement;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "run.json";

#[derive(Debug, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Provenance record of one invocation. Everything except the two
/// timestamps is a pure function of the flags and the input data.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    pub jobs: usize,
    pub dataset_hash: String,
    pub n_measurements: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputEntry>,
    /// SHA-256 over the sorted `(path, sha256)` pairs of `outputs`.
    pub results_hash: String,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Order-independent digest of a dataset: content hashes sorted by id.
pub fn dataset_hash(measurements: &[IQMeasurement]) -> String {
    let mut pairs: Vec<(&str, [u8; 32])> = measurements.iter().map(|m| (m.id.as_str(), m.content_hash())).collect();
    pairs.sort();
    let mut h = Sha256::new();
    for (_, c) in pairs {
        h.update(c);
    }
    hex::encode(h.finalize())
}

/// Creates `dir`, refusing to reuse a non-empty one unless `force`.
pub fn prepare_out(dir: &Path, force: bool) -> CliResult<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
        if entries.next().is_some() && !force {
            return Err(CliError::OutputExists(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Collects the files of one run and finally writes the manifest.
pub struct OutputSet {
    dir: PathBuf,
    entries: Vec<OutputEntry>,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Self {
        OutputSet {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        }
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> CliResult<()> {
        let bytes = bytes.as_ref();
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.record(name, bytes);
        Ok(())
    }

    /// Registers a file written by someone else.
    pub fn record(&mut self, name: &str, bytes: &[u8]) {
        self.entries.push(OutputEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }

    /// Removes a stale optional output left by an earlier `--force` run.
    pub fn remove_stale(&self, name: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        match fs::remove_file(&path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }

    pub fn finish(mut self, mut manifest: RunManifest) -> CliResult<RunManifest> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.path.as_bytes());
            h.update([0]);
            h.update(e.sha256.as_bytes());
            h.update([b'\n']);
        }
        manifest.results_hash = hex::encode(h.finalize());
        manifest.outputs = self.entries;
        manifest.finished_unix = unix_now();
        let text = serde_json::to_string_pretty(&manifest).map_err(mdrobust::Error::from)?;
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64, jobs: usize, started_unix: u64) -> Self {
        let config_hash = sha256_hex(config.to_string().as_bytes());
        RunManifest {
            tool: "mdrobust",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            config_hash,
            seed,
            jobs,
            dataset_hash: String::new(),
            n_measurements: 0,
            started_unix,
            finished_unix: 0,
            outputs: Vec::new(),
            results_hash: String::new(),
            extra: serde_json::Value::Null,
        }
    }
}
