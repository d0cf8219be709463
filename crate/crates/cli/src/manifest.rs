//! Stage manifests (input hashes, config snapshot, output hashes) and the
//! single-writer lock on the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut file = fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot hash {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// One stage's provenance record. Reruns with identical inputs, config, and
/// seed produce byte-identical manifests: no timestamps, sorted maps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: BTreeMap<String, serde_json::Value>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub notes: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(stage: &str, config: &RunConfig) -> Self {
        Self {
            stage: stage.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config: config.snapshot(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            notes: BTreeMap::new(),
        }
    }

    pub fn record_input(&mut self, name: &str, path: &Path) -> CliResult<()> {
        self.inputs.insert(name.to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn record_output(&mut self, output_dir: &Path, file_name: &str) -> CliResult<()> {
        self.outputs
            .insert(file_name.to_string(), sha256_file(&output_dir.join(file_name))?);
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: serde_json::Value) {
        self.notes.insert(key.to_string(), value);
    }

    /// Writes `manifest_<stage>.json` into the output directory.
    pub fn write(&self, output_dir: &Path) -> CliResult<PathBuf> {
        let path = output_dir.join(format!("manifest_{}.json", self.stage));
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Data(format!("serialize manifest: {e}")))?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Exclusive advisory lock: at most one writer per output directory. The
/// lock file is removed on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(output_dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(output_dir)?;
        let path = output_dir.join(".newsvol.lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CliError::Dependency(format!(
                    "output directory is locked by another writer ({} exists)",
                    path.display()
                )))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
