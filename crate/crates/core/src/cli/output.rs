//! Output directories with a content-hash manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const MANIFEST: &str = "manifest.json";
pub const RESOLVED_CONFIG: &str = "resolved-config.json";

#[derive(Serialize)]
struct ManifestEntry {
    sha256: String,
    bytes: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    /// `success`, or `numerical_failure` when the run aborted.
    status: &'a str,
    files: BTreeMap<String, ManifestEntry>,
}

/// Collects the files of one run. [`OutputDir::finish`] hashes every file
/// under the directory (snapshots included) into `manifest.json`.
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(&self, command: &str, success: bool) -> Result<()> {
        let mut files = BTreeMap::new();
        collect(&self.root, &self.root, &mut files)?;
        files.remove(MANIFEST);
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            status: if success {
                "success"
            } else {
                "numerical_failure"
            },
            files,
        };
        self.write_json(MANIFEST, &manifest)
    }
}

fn collect(root: &Path, dir: &Path, out: &mut BTreeMap<String, ManifestEntry>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect(root, &path, out)?;
            continue;
        }
        let bytes = std::fs::read(&path)?;
        let rel = path.strip_prefix(root).expect("walked below root");
        let key = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        out.insert(
            key,
            ManifestEntry {
                sha256: format!("{:x}", Sha256::digest(&bytes)),
                bytes: bytes.len() as u64,
            },
        );
    }
    Ok(())
}
