//! Content-addressed response cache.

use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Hex SHA-256 of the prompt bytes.
pub fn prompt_key(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(ResponseCache { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, prompt: &str) -> PathBuf {
        self.dir.join(format!("{}.txt", prompt_key(prompt)))
    }

    pub fn get(&self, prompt: &str) -> Option<String> {
        std::fs::read_to_string(self.path(prompt)).ok()
    }

    /// Writes through a temporary file and a rename so concurrent writers
    /// never expose a partial entry.
    pub fn put(&self, prompt: &str, response: &str) -> std::io::Result<()> {
        let mut tmp = tempfile_in(&self.dir)?;
        tmp.1.write_all(response.as_bytes())?;
        tmp.1.sync_all()?;
        std::fs::rename(&tmp.0, self.path(prompt))
    }
}

fn tempfile_in(dir: &Path) -> std::io::Result<(PathBuf, std::fs::File)> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let path = dir.join(format!(".tmp-{}-{n}", std::process::id()));
    let file = std::fs::File::create(&path)?;
    Ok((path, file))
}
