//! Atomic output files and the run manifest.
//!
//! Outputs are written to temporary files beside their targets and only
//! renamed into place once every output of the command has been produced,
//! so a failed run leaves no partial artifacts behind.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
    bytes: u64,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

struct Staged {
    target: PathBuf,
    file: NamedTempFile,
    sha256: String,
    bytes: u64,
}

/// Files waiting to be moved into place.
#[derive(Default)]
pub struct Outputs {
    root: PathBuf,
    staged: Vec<Staged>,
}

fn temp_beside(target: &Path) -> Result<NamedTempFile, CliError> {
    let dir = match target.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    tempfile::Builder::new()
        .prefix(".cvdiscord-")
        .suffix(".tmp")
        .tempfile_in(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot create a temporary file in {}: {e}", dir.display())))
}

impl Outputs {
    /// Manifest paths are reported relative to `root` where possible.
    pub fn new(root: &Path) -> Self {
        Outputs {
            root: root.to_path_buf(),
            staged: Vec::new(),
        }
    }

    /// Streams content produced by `fill` into a temporary file for `target`.
    pub fn stage_with<F>(&mut self, target: &Path, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
    {
        if self.staged.iter().any(|s| s.target == target) {
            return Err(CliError::Validation(format!("output {} is produced twice", target.display())));
        }
        let file = temp_beside(target)?;
        let (sha256, bytes) = {
            let mut w = HashingWriter {
                inner: BufWriter::new(file.as_file()),
                hasher: Sha256::new(),
                bytes: 0,
            };
            fill(&mut w)?;
            w.flush()?;
            (hex::encode(w.hasher.finalize()), w.bytes)
        };
        file.as_file().sync_all()?;
        self.staged.push(Staged {
            target: target.to_path_buf(),
            file,
            sha256,
            bytes,
        });
        Ok(())
    }

    pub fn stage(&mut self, target: &Path, content: &[u8]) -> Result<(), CliError> {
        self.stage_with(target, |w| Ok(w.write_all(content)?))
    }

    pub fn is_empty(&self) -> bool {
        self.staged.is_empty()
    }

    /// Renames every staged file onto its target.
    pub fn commit(self) -> Result<Vec<OutputEntry>, CliError> {
        let root = self.root;
        let mut entries = Vec::with_capacity(self.staged.len());
        for s in self.staged {
            s.file
                .persist(&s.target)
                .map_err(|e| CliError::Runtime(format!("cannot write {}: {}", s.target.display(), e.error)))?;
            entries.push(OutputEntry {
                path: display_relative(&root, &s.target),
                sha256: s.sha256,
                bytes: s.bytes,
            });
        }
        Ok(entries)
    }
}

fn display_relative(root: &Path, p: &Path) -> String {
    p.strip_prefix(root).unwrap_or(p).to_string_lossy().into_owned()
}

/// Writes one file atomically.
pub fn write_atomic(target: &Path, content: &[u8]) -> Result<(), CliError> {
    let mut out = Outputs::new(Path::new(""));
    out.stage(target, content)?;
    out.commit().map(|_| ())
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub status: &'static str,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub config: serde_json::Value,
    pub timings: Vec<Timing>,
    pub total_seconds: f64,
    pub outputs: Vec<OutputEntry>,
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}
