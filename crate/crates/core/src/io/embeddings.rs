//! Dense embedding matrices and their on-disk format.
//!
//! An embedding file is a 24-byte header followed by a little-endian `f32`
//! payload, one row per id:
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `FKEM`                  |
//! | 4      | 4    | format version (`u32`, = 1)   |
//! | 8      | 4    | dimension (`u32`)             |
//! | 12     | 4    | reserved, zero                |
//! | 16     | 8    | row count (`u64`)             |
//! | 24     | ...  | `rows * dim` IEEE-754 `f32`   |
//!
//! Row ids live in a sidecar manifest next to the matrix (`<file>.ids`), one id
//! per line in row order.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"FKEM";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("embedding dimension must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::Validation(format!(
                "{} ids with dimension {dim} need {} values, got {}",
                ids.len(),
                ids.len() * dim,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value in row {:?}",
                ids[pos / dim]
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (row, id) in ids.iter().enumerate() {
            if id.is_empty() || id.contains(['\n', '\r']) {
                return Err(Error::Validation(format!("invalid row id {id:?}")));
            }
            if index.insert(id.clone(), row).is_some() {
                return Err(Error::Validation(format!("duplicate row id {id:?}")));
            }
        }
        Ok(Self {
            ids,
            dim,
            data,
            index,
        })
    }

    /// Builds a matrix from per-row vectors, checking they share one dimension.
    pub fn from_rows(ids: Vec<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if ids.len() != rows.len() {
            return Err(Error::Validation(format!(
                "{} ids for {} rows",
                ids.len(),
                rows.len()
            )));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(ids, dim.max(1), data)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.position(id).map(|i| self.row(i))
    }

    /// Keeps only the named rows, in the order given.
    pub fn select(&self, ids: &[String]) -> Result<Self> {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for id in ids {
            let row = self
                .get(id)
                .ok_or_else(|| Error::Validation(format!("id {id:?} not in embedding matrix")))?;
            data.extend_from_slice(row);
        }
        Self::new(ids.to_vec(), self.dim, data)
    }
}

/// Path of the id manifest that accompanies an embedding file.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".ids");
    PathBuf::from(name)
}

pub fn encode_embeddings(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + m.data.len() * 4);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.dim as u32).to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    buf.extend_from_slice(&(m.len() as u64).to_le_bytes());
    for v in &m.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_embeddings(bytes: &[u8], ids: Vec<String>) -> Result<EmbeddingMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "truncated header: {} bytes",
            bytes.len()
        )));
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = word(8) as usize;
    if dim == 0 {
        return Err(Error::Format("dimension is zero".into()));
    }
    let rows = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let rows = usize::try_from(rows).map_err(|_| Error::Format("row count overflow".into()))?;
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format("payload size overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "payload holds {} bytes, header declares {rows} rows of dimension {dim} ({expected} bytes)",
            bytes.len()
        )));
    }
    if ids.len() != rows {
        return Err(Error::Format(format!(
            "manifest lists {} ids, header declares {rows} rows",
            ids.len()
        )));
    }
    let data: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Format(format!(
            "non-finite value in row {}",
            pos / dim
        )));
    }
    EmbeddingMatrix::new(ids, dim, data).map_err(|e| Error::Format(e.to_string()))
}

/// Writes the matrix and its id manifest. Both files are written to temporary
/// names first and renamed into place.
pub fn write_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let manifest = manifest_path(path);
    let mut ids = String::new();
    for id in &m.ids {
        ids.push_str(id);
        ids.push('\n');
    }
    write_atomic(&manifest, ids.as_bytes())?;
    write_atomic(path, &encode_embeddings(m))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let manifest = manifest_path(path);
    let ids_text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let ids: Vec<String> = ids_text.lines().map(str::to_owned).collect();
    decode_embeddings(&bytes, ids)
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
