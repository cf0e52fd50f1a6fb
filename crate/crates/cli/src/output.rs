//! CSV tables and the run manifest.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Comma-separated table with a header row and LF line endings. Numbers go
/// through `Display`, the shortest representation that round-trips.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text, columns: header.len() }
    }

    pub fn row(&mut self, cells: &[&dyn Display]) {
        assert_eq!(cells.len(), self.columns, "row width");
        let cells: Vec<String> = cells.iter().map(|c| c.to_string()).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the resolved configuration serialized as TOML.
    pub config_sha256: String,
    pub started: String,
    pub finished: String,
    /// Set when a campaign stopped early; the listed files hold what finished.
    pub partial: bool,
    pub files: Vec<FileDigest>,
}

/// Collects the files of one invocation.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<FileDigest>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(OutputDir { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileDigest { name: name.into(), bytes: contents.len() as u64, sha256: sha256_hex(contents.as_bytes()) });
        Ok(path)
    }

    /// List files written by an earlier step of the same invocation.
    pub fn adopt(&mut self, files: Vec<FileDigest>) {
        for f in files {
            self.files.retain(|g| g.name != f.name);
            self.files.push(f);
        }
    }

    pub fn files(&self) -> &[FileDigest] {
        &self.files
    }

    pub fn finish(mut self, mut manifest: RunManifest) -> Result<RunManifest> {
        manifest.files = std::mem::take(&mut self.files);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}
