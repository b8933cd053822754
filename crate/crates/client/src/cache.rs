//! Content-addressed response cache.
//!
//! One JSON file per request hash, holding the request and the raw
//! response. Writes go through a temp file and an atomic rename, so
//! concurrent writers of the same key are safe; last rename wins with
//! identical content either way.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ClientError, Result};
use crate::wire::{ChatRequest, ChatResponse};

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    tag: String,
    request: ChatRequest,
    response: ChatResponse,
}

/// Hash of a request plus a tag (the template id), hex encoded.
pub fn request_hash(tag: &str, request: &ChatRequest) -> Result<String> {
    let canonical = serde_json::to_string(&(tag, request))?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

#[derive(Debug)]
pub struct DiskCache {
    dir: PathBuf,
    tmp_counter: AtomicU64,
}

impl DiskCache {
    /// Opens (and creates) a cache directory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| ClientError::io(&dir, e))?;
        Ok(DiskCache {
            dir,
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_of(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    /// Looks up a cached response.
    pub fn get(&self, hash: &str) -> Result<Option<ChatResponse>> {
        let path = self.path_of(hash);
        match std::fs::read(&path) {
            Ok(bytes) => {
                let entry: CacheEntry = serde_json::from_slice(&bytes).map_err(|e| {
                    ClientError::BadResponse(format!(
                        "corrupt cache entry {}: {e}",
                        path.display()
                    ))
                })?;
                Ok(Some(entry.response))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ClientError::io(&path, e)),
        }
    }

    /// Stores a response under its request hash.
    pub fn put(
        &self,
        hash: &str,
        tag: &str,
        request: &ChatRequest,
        response: &ChatResponse,
    ) -> Result<()> {
        let entry = CacheEntry {
            tag: tag.to_string(),
            request: request.clone(),
            response: response.clone(),
        };
        let path = self.path_of(hash);
        let tmp = self.dir.join(format!(
            ".{hash}.{}.{}.tmp",
            std::process::id(),
            self.tmp_counter.fetch_add(1, Ordering::Relaxed)
        ));
        let bytes = serde_json::to_vec_pretty(&entry)?;
        std::fs::write(&tmp, &bytes).map_err(|e| ClientError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| ClientError::io(&path, e))?;
        Ok(())
    }

    /// Number of cached entries.
    pub fn len(&self) -> Result<usize> {
        let mut count = 0;
        for entry in std::fs::read_dir(&self.dir).map_err(|e| ClientError::io(&self.dir, e))? {
            let entry = entry.map_err(|e| ClientError::io(&self.dir, e))?;
            if entry.path().extension().is_some_and(|e| e == "json") {
                count += 1;
            }
        }
        Ok(count)
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.len()? == 0)
    }
}
