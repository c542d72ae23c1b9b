use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Git-style object hash: SHA-256 over `"blob <len>\0"` followed by the bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    format!("{:x}", h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileRecord {
    pub fn of(path: &Path) -> std::io::Result<Self> {
        let data = std::fs::read(path)?;
        Ok(Self {
            path: path.display().to_string(),
            bytes: data.len() as u64,
            sha256: content_hash(&data),
        })
    }

    /// Whether the file on disk still has this hash.
    pub fn matches_disk(&self) -> bool {
        std::fs::read(&self.path).is_ok_and(|d| content_hash(&d) == self.sha256)
    }
}

/// Record of one command run, written beside its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub started_unix_ms: u64,
    pub elapsed_ms: f64,
    /// Command-specific results (accuracy, sizes, verdicts, ...).
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>, seed: u64, config: serde_json::Value) -> Self {
        let started_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            argv,
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix_ms,
            elapsed_ms: 0.0,
            summary: serde_json::Value::Null,
        }
    }

    /// Manifest location for a primary file: `<file>.manifest.json`, or
    /// `<file>.<command>.manifest.json` when the file is an input.
    pub fn path_for(primary: &Path, command: Option<&str>) -> PathBuf {
        let mut name = primary.file_name().unwrap_or_default().to_os_string();
        if let Some(c) = command {
            name.push(format!(".{c}"));
        }
        name.push(".manifest.json");
        primary.with_file_name(name)
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n")
    }
}
