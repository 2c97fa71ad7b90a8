use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use geovec_core::hash::fnv1a64;

use super::OsmError;

/// Stable cache key of a canonical query string.
pub fn cache_key(canonical_query: &str) -> u64 {
    fnv1a64(canonical_query.as_bytes())
}

/// Append-only response cache: one file per key named by the key in hex.
#[derive(Debug)]
pub struct DiskCache {
    dir: PathBuf,
    inflight: Mutex<HashMap<u64, Arc<Mutex<()>>>>,
}

impl DiskCache {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(DiskCache { dir, inflight: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: u64) -> PathBuf {
        self.dir.join(format!("{key:016x}"))
    }

    pub fn get(&self, key: u64) -> Result<Option<String>, OsmError> {
        let path = self.path_for(key);
        match fs::read(&path) {
            Ok(bytes) => String::from_utf8(bytes)
                .map(Some)
                .map_err(|_| OsmError::CacheCorrupt { path, reason: "not valid UTF-8".into() }),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(OsmError::CacheCorrupt { path, reason: e.to_string() }),
        }
    }

    fn put(&self, key: u64, body: &str) -> Result<(), OsmError> {
        let path = self.path_for(key);
        let tmp = self.dir.join(format!(".{key:016x}.{}.tmp", std::process::id()));
        let write = || -> io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(body.as_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            OsmError::Io(format!("{}: {e}", path.display()))
        })
    }

    /// Cached body for `key`, or the result of `fetch` persisted first.
    /// Concurrent callers for one key share a single fetch.
    pub fn lookup_or_fetch<F>(&self, key: u64, fetch: F) -> Result<String, OsmError>
    where
        F: FnOnce() -> Result<String, OsmError>,
    {
        if let Some(body) = self.get(key)? {
            return Ok(body);
        }
        let gate = {
            let mut inflight = self.inflight.lock().unwrap_or_else(|e| e.into_inner());
            inflight.entry(key).or_default().clone()
        };
        let _held = gate.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(body) = self.get(key)? {
            return Ok(body);
        }
        let body = fetch()?;
        self.put(key, &body)?;
        Ok(body)
    }
}
