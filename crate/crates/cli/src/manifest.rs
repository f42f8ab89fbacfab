//! Sidecar files recording how an output was produced.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Hex SHA-256 of `bytes`.
pub fn fingerprint(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct Manifest {
    command: String,
    seed: u64,
    fingerprint: String,
    config: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, fingerprint: String) -> Self {
        Manifest {
            command: command.to_string(),
            seed,
            fingerprint,
            config: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }

    pub fn render(&self) -> String {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut out = format!(
            "command\t{}\nversion\t{}\nseed\t{}\ndataset_sha256\t{}\ntimestamp\t{}\n",
            self.command,
            env!("CARGO_PKG_VERSION"),
            self.seed,
            self.fingerprint,
            timestamp
        );
        for (k, v) in &self.config {
            out.push_str(&format!("config\t{k}\t{v}\n"));
        }
        out
    }

    /// Path of the manifest accompanying `output`.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest");
        PathBuf::from(name)
    }

    pub fn write_beside(&self, output: &Path) -> CliResult<()> {
        let path = Self::path_for(output);
        std::fs::write(&path, self.render()).map_err(|source| CliError::Io { path, source })
    }
}
