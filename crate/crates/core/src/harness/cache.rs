//! Content-addressed cache of command outputs.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const CACHE_ENV: &str = "FCSLAB_CACHE_DIR";

/// Everything a command produced: output files by name and its exit code.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CachedRun {
    pub files: BTreeMap<String, String>,
    pub exit_code: i32,
}

#[derive(Clone, Debug)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$FCSLAB_CACHE_DIR`, else `$XDG_CACHE_HOME/fcslab`, else `$HOME/.cache/fcslab`.
    pub fn from_env() -> Option<Self> {
        if let Some(dir) = std::env::var_os(CACHE_ENV) {
            return Some(Self::new(dir));
        }
        if let Some(dir) = std::env::var_os("XDG_CACHE_HOME") {
            return Some(Self::new(Path::new(&dir).join("fcslab")));
        }
        std::env::var_os("HOME").map(|h| Self::new(Path::new(&h).join(".cache").join("fcslab")))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Hex SHA-256 of the given parts, separated so that no two part lists collide.
    pub fn key(parts: &[&str]) -> String {
        let mut h = Sha256::new();
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p.as_bytes());
        }
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// A missing or unreadable entry is a miss.
    pub fn get(&self, key: &str) -> Option<CachedRun> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Writes through a temporary file and renames it into place, so readers
    /// never see a partial entry.
    pub fn put(&self, key: &str, run: &CachedRun) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(serde_json::to_string(run)?.as_bytes())?;
        tmp.persist(self.path(key)).map_err(|e| e.error)?;
        Ok(())
    }
}
