//! Content-addressed result store. Entries are written once and replayed
//! byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::Failure;

pub const CACHE_ENV: &str = "DBARLAB_CACHE_DIR";

/// One product file: name relative to the output directory, and its bytes.
pub type Artifact = (String, Vec<u8>);

#[derive(Debug, Serialize, Deserialize)]
pub struct CacheMeta {
    pub key: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch at write time.
    pub created: u64,
    pub files: Vec<String>,
}

pub struct ResultCache {
    root: Option<PathBuf>,
}

/// sha256 over the canonical JSON of whatever determines the product.
pub fn key_of<T: Serialize>(command: &str, subset: &T) -> String {
    let body = serde_json::to_vec(&(command, env!("CARGO_PKG_VERSION"), subset)).expect("config serializes");
    hex::encode(Sha256::digest(&body))
}

impl ResultCache {
    /// `None` root disables the cache.
    pub fn new(root: Option<PathBuf>) -> Self {
        Self { root }
    }

    pub fn from_env(default_root: &Path, enabled: bool) -> Self {
        if !enabled {
            return Self::new(None);
        }
        let root = std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| default_root.to_path_buf());
        Self::new(Some(root))
    }

    fn entry(&self, key: &str) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join(key))
    }

    pub fn load(&self, key: &str) -> Option<Vec<Artifact>> {
        let dir = self.entry(key)?;
        let meta: CacheMeta = serde_json::from_slice(&fs::read(dir.join("meta.json")).ok()?).ok()?;
        meta.files
            .iter()
            .map(|f| fs::read(dir.join("payload").join(f)).ok().map(|b| (f.clone(), b)))
            .collect()
    }

    pub fn store(&self, key: &str, artifacts: &[Artifact]) -> Result<(), Failure> {
        let Some(dir) = self.entry(key) else { return Ok(()) };
        let payload = dir.join("payload");
        fs::create_dir_all(&payload)?;
        for (name, bytes) in artifacts {
            fs::write(payload.join(name), bytes)?;
        }
        let meta = CacheMeta {
            key: key.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            files: artifacts.iter().map(|a| a.0.clone()).collect(),
        };
        // meta last: an entry without it is treated as absent
        fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&meta)?)?;
        Ok(())
    }

    /// Returns the cached artifacts for `key`, or computes and stores them.
    /// The flag reports whether the result came from the cache.
    pub fn get_or_compute(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<Vec<Artifact>, Failure>,
    ) -> Result<(Vec<Artifact>, bool), Failure> {
        if let Some(hit) = self.load(key) {
            return Ok((hit, true));
        }
        let fresh = compute()?;
        self.store(key, &fresh)?;
        Ok((fresh, false))
    }
}
