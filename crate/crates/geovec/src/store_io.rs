//! Embedding store files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use geovec_core::embed::store::{decode, encode, StoreError};
use geovec_core::GeoRepresentation;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreIoError {
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Format {
        path: PathBuf,
        #[source]
        source: StoreError,
    },
}

impl StoreIoError {
    pub fn store_error(&self) -> Option<&StoreError> {
        match self {
            StoreIoError::Format { source, .. } => Some(source),
            StoreIoError::Io { .. } => None,
        }
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn save_store(rep: &GeoRepresentation, path: &Path) -> Result<(), StoreIoError> {
    write_atomic(path, &encode(rep)).map_err(|e| StoreIoError::Io { path: path.to_path_buf(), message: e.to_string() })
}

pub fn load_store(path: &Path) -> Result<GeoRepresentation, StoreIoError> {
    let bytes = fs::read(path).map_err(|e| StoreIoError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    decode(&bytes).map_err(|source| StoreIoError::Format { path: path.to_path_buf(), source })
}
