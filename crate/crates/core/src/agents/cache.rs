use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::backend::{cache_key, Backend, BackendError, ChatTurn, CompletionParams};

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    model: String,
    timestamp_ms: u64,
    response: String,
}

/// On-disk response cache: one JSON file per content key. Writes go through a
/// temp file in the same directory followed by an atomic rename, so concurrent
/// writers of the same key race harmlessly and readers never observe a torn
/// file.
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)
            .map_err(|e| BackendError::Io(format!("create cache dir {}: {e}", dir.display())))?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Returns the cached response for `key`, or None. Unreadable or corrupt
    /// entries count as misses.
    pub fn get(&self, key: &str) -> Option<String> {
        let raw = std::fs::read_to_string(self.path_for(key)).ok()?;
        let entry: CacheEntry = serde_json::from_str(&raw).ok()?;
        Some(entry.response)
    }

    pub fn put(&self, key: &str, model: &str, response: &str) -> Result<(), BackendError> {
        let entry = CacheEntry {
            model: model.to_string(),
            timestamp_ms: now_ms(),
            response: response.to_string(),
        };
        let body = serde_json::to_vec(&entry)
            .map_err(|e| BackendError::Io(format!("serialize cache entry: {e}")))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .map_err(|e| BackendError::Io(format!("cache temp file: {e}")))?;
        tmp.write_all(&body)
            .map_err(|e| BackendError::Io(format!("write cache entry: {e}")))?;
        tmp.persist(self.path_for(key))
            .map_err(|e| BackendError::Io(format!("persist cache entry: {e}")))?;
        Ok(())
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Transparent caching wrapper: identical `(messages, params)` pairs are
/// served from disk without touching the inner backend.
pub struct CachedBackend {
    inner: Box<dyn Backend>,
    cache: ResponseCache,
}

impl CachedBackend {
    pub fn new(inner: Box<dyn Backend>, cache: ResponseCache) -> Self {
        CachedBackend { inner, cache }
    }
}

impl Backend for CachedBackend {
    fn complete(
        &self,
        messages: &[ChatTurn],
        params: &CompletionParams,
    ) -> Result<String, BackendError> {
        let key = cache_key(messages, params);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let response = self.inner.complete(messages, params)?;
        self.cache.put(&key, &params.model, &response)?;
        Ok(response)
    }

    fn id(&self) -> String {
        self.inner.id()
    }
}
