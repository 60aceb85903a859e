//! Run manifests: what was run, on which inputs, and what it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::io::{read_text, write_text};
use crate::error::{Result, SwiftError};
use crate::solver::SolverConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    /// Command-line arguments after the program name.
    pub command: Vec<String>,
    pub config: Option<SolverConfig>,
    pub inputs: Vec<FileDigest>,
    /// Output files, relative to the output location.
    pub outputs: Vec<FileDigest>,
    pub timings: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(command: Vec<String>) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            config: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest {
            path: path.to_path_buf(),
            sha256: file_digest(path)?,
        });
        Ok(())
    }

    /// Records `path`, stored relative to `base`.
    pub fn add_output(&mut self, base: &Path, path: &Path) -> Result<()> {
        let rel = path.strip_prefix(base).unwrap_or(path).to_path_buf();
        self.outputs.push(FileDigest {
            path: rel,
            sha256: file_digest(path)?,
        });
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| SwiftError::Config(format!("serializing manifest: {e}")))?;
        write_text(path, &(text + "\n"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_text(path)?).map_err(|e| SwiftError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| SwiftError::io(format!("reading {}", path.display()), e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
