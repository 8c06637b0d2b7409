//! `run.json`: what ran, on which inputs, with which seeds, producing what.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

pub const MANIFEST_FORMAT_VERSION: &str = "1.0";
pub const MANIFEST_FILE: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: String,
    pub tool_version: String,
    pub command: String,
    /// Every flag after defaults and the config file were applied.
    pub configuration: Value,
    pub config_file: Option<String>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
    /// Command-specific numbers (α, row counts, scores, ...).
    pub results: BTreeMap<String, Value>,
    pub started_at_unix: f64,
    pub wall_clock_seconds: f64,
}

/// Collects manifest fields while a command runs.
pub struct Recorder {
    out_dir: PathBuf,
    started: Instant,
    manifest: RunManifest,
}

impl Recorder {
    pub fn new(command: &str, configuration: Value, config_file: Option<PathBuf>, out_dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(out_dir).map_err(|e| {
            CliError::Usage(format!("cannot create output directory {}: {e}", out_dir.display()))
        })?;
        let started_at_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0.0, |d| d.as_secs_f64());
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            started: Instant::now(),
            manifest: RunManifest {
                format_version: MANIFEST_FORMAT_VERSION.into(),
                tool_version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                configuration,
                config_file: config_file.map(|p| p.display().to_string()),
                seeds: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                results: BTreeMap::new(),
                started_at_unix,
                wall_clock_seconds: 0.0,
            },
        })
    }

    pub fn seed(&mut self, name: &str, seed: u64) {
        self.manifest.seeds.insert(name.into(), seed);
    }

    pub fn result(&mut self, name: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.manifest.results.insert(name.into(), v);
    }

    /// Reads an input file, recording its checksum. Missing files are usage errors.
    pub fn read_input(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = fs::read(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        self.manifest.inputs.push(InputFile {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(bytes)
    }

    pub fn read_input_text(&mut self, path: &Path) -> CliResult<String> {
        String::from_utf8(self.read_input(path)?)
            .map_err(|_| CliError::Usage(format!("{} is not UTF-8 text", path.display())))
    }

    /// Writes `name` under the output directory.
    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> CliResult<PathBuf> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
        self.manifest.outputs.push(path.display().to_string());
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Internal(format!("cannot serialize {name}: {e}")))?;
        self.write(name, text + "\n")
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Writes `run.json` and returns the manifest.
    pub fn finish(mut self) -> CliResult<RunManifest> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let path = self.out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| CliError::Internal(format!("cannot serialize manifest: {e}")))?;
        fs::write(&path, text + "\n")
            .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
        Ok(self.manifest)
    }
}
