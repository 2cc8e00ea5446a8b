use std::fs;
use std::path::{Path, PathBuf};

use paraxial_core::{snapshot, Field};
use serde::Serialize;

use crate::CliError;

pub const DIGEST_FILE: &str = "config.sha256";
pub const MANIFEST_FILE: &str = "manifest.json";

/// An output directory bound to one config digest.
pub struct OutputDir {
    root: PathBuf,
    digest: String,
    command: String,
    files: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_digest: &'a str,
    version: &'a str,
    files: &'a [String],
}

impl OutputDir {
    /// Creates `root` if needed. Refuses a directory that already holds a different digest.
    pub fn open(root: &Path, digest: &str, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        let digest_path = root.join(DIGEST_FILE);
        if let Ok(existing) = fs::read_to_string(&digest_path) {
            if existing.trim() != digest {
                return Err(CliError::DigestMismatch { dir: root.display().to_string(), found: existing.trim().to_string() });
            }
        }
        fs::write(&digest_path, format!("{digest}\n")).map_err(|e| CliError::io(&digest_path, e))?;
        Ok(Self { root: root.to_path_buf(), digest: digest.to_string(), command: command.to_string(), files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn save_field(&mut self, name: &str, f: &Field) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        snapshot::save(&path, f)?;
        self.files.push(name.to_string());
        Ok(path)
    }

    /// Writes the manifest listing every file produced.
    pub fn finish(mut self) -> Result<(), CliError> {
        self.files.sort();
        self.files.dedup();
        let manifest = Manifest { command: &self.command, config_digest: &self.digest, version: env!("CARGO_PKG_VERSION"), files: &self.files };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        let path = self.path(MANIFEST_FILE);
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }
}
