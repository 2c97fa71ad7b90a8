//! Binary embedding store.
//!
//! Little-endian layout:
//!
//! | field     | bytes                                               |
//! |-----------|-----------------------------------------------------|
//! | magic     | `GVEC`                                              |
//! | version   | u32, currently 1                                    |
//! | N, M      | u32 each                                            |
//! | meta len  | u32, followed by that many bytes of UTF-8 JSON      |
//! | matrix    | N x M f32, column-major (one column per node)       |
//! | checksum  | u64 FNV-1a over every preceding byte                |

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::GeoRepresentation;
use crate::hash::fnv1a64;
use crate::prompt::PromptVariant;

pub const MAGIC: [u8; 4] = *b"GVEC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("not an embedding store (bad magic)")]
    BadMagic,
    #[error("unsupported store version {0}")]
    VersionMismatch(u32),
    #[error("store is truncated")]
    TruncatedFile,
    #[error("checksum mismatch: stored {stored:016x}, computed {computed:016x}")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error("{0} unexpected bytes after checksum")]
    TrailingBytes(usize),
    #[error("bad metadata: {0}")]
    Metadata(String),
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    provider_id: String,
    variant: String,
    prompt_hash: String,
    node_ids: Vec<String>,
}

pub fn encode(rep: &GeoRepresentation) -> Vec<u8> {
    let meta = Metadata {
        provider_id: rep.provider_id.clone(),
        variant: format!("{}", rep.variant),
        prompt_hash: format!("{:016x}", rep.prompt_hash),
        node_ids: rep.node_ids().to_vec(),
    };
    let meta = serde_json::to_vec(&meta).expect("metadata serializes");
    let mut out = Vec::with_capacity(20 + meta.len() + rep.as_slice().len() * 4 + 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(rep.len() as u32).to_le_bytes());
    out.extend_from_slice(&(rep.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    for v in rep.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let checksum = fnv1a64(&out);
    out.extend_from_slice(&checksum.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self.pos.checked_add(n).ok_or(StoreError::TruncatedFile)?;
        let s = self.buf.get(self.pos..end).ok_or(StoreError::TruncatedFile)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, StoreError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode(bytes: &[u8]) -> Result<GeoRepresentation, StoreError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(StoreError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(StoreError::VersionMismatch(version));
    }
    let n = r.u32()? as usize;
    let m = r.u32()? as usize;
    let meta_len = r.u32()? as usize;
    let meta = r.take(meta_len)?;
    let values = n.checked_mul(m).and_then(|x| x.checked_mul(4)).ok_or(StoreError::TruncatedFile)?;
    let matrix = r.take(values)?;
    let body_end = r.pos;
    let stored = r.take(8)?;
    let stored = u64::from_le_bytes(stored.try_into().expect("8 bytes"));
    let computed = fnv1a64(&bytes[..body_end]);
    if stored != computed {
        return Err(StoreError::ChecksumMismatch { stored, computed });
    }
    if r.pos != bytes.len() {
        return Err(StoreError::TrailingBytes(bytes.len() - r.pos));
    }

    let meta: Metadata = serde_json::from_slice(meta).map_err(|e| StoreError::Metadata(format!("{e}")))?;
    if meta.node_ids.len() != n {
        return Err(StoreError::Metadata(format!(
            "{} node ids for N = {}",
            meta.node_ids.len(),
            n
        )));
    }
    let variant: PromptVariant = meta
        .variant
        .parse()
        .map_err(|e| StoreError::Metadata(format!("{e}")))?;
    let prompt_hash =
        u64::from_str_radix(&meta.prompt_hash, 16).map_err(|e| StoreError::Metadata(format!("{e}")))?;
    let data: Vec<f32> = matrix
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    GeoRepresentation::from_columns(meta.node_ids, m, data, meta.provider_id, variant, prompt_hash)
        .map_err(|e| StoreError::Metadata(format!("{e}")))
}
