//! `CSID` dataset files.
//!
//! Layout: `b"CSID"`, `u32` version, `u32` d, `u64` rows (all little-endian),
//! then `rows * d` little-endian `f64` values in row-major order, then one
//! label byte per row. Provenance goes to a `.meta.json` sidecar.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::dataset::{CsiDataset, DatasetError, Provenance};

pub const MAGIC: &[u8; 4] = b"CSID";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("bad magic bytes at offset 0")]
    BadMagic,
    #[error("unsupported version {0} at offset 4")]
    UnsupportedVersion(u32),
    #[error("truncated at byte offset {offset}: {needed} bytes expected")]
    Truncated { offset: usize, needed: usize },
    #[error("{extra} trailing bytes at offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("header at offset 8: row count {rows} x dimensionality {d} overflows")]
    Oversized { rows: u64, d: u32 },
    #[error(transparent)]
    Invalid(#[from] DatasetError),
    #[error("{path}: bad sidecar: {source}")]
    Sidecar { path: PathBuf, source: serde_json::Error },
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn encode_dataset(ds: &CsiDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + ds.values().len() * 8 + ds.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    for v in ds.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(ds.labels());
    out
}

pub fn decode_dataset(bytes: &[u8]) -> Result<CsiDataset, DatasetIoError> {
    if bytes.len() < HEADER_LEN {
        return Err(DatasetIoError::Truncated { offset: bytes.len(), needed: HEADER_LEN });
    }
    if &bytes[..4] != MAGIC {
        return Err(DatasetIoError::BadMagic);
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(DatasetIoError::UnsupportedVersion(version));
    }
    let d = u32_at(8);
    let rows = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let body = (rows as u128) * (d as u128) * 8 + rows as u128;
    let total = HEADER_LEN as u128 + body;
    if total > usize::MAX as u128 {
        return Err(DatasetIoError::Oversized { rows, d });
    }
    let total = total as usize;
    if bytes.len() < total {
        return Err(DatasetIoError::Truncated { offset: bytes.len(), needed: total });
    }
    if bytes.len() > total {
        return Err(DatasetIoError::TrailingBytes { offset: total, extra: bytes.len() - total });
    }

    let (d, rows) = (d as usize, rows as usize);
    let mut ds = CsiDataset::new(d)?;
    let values_end = HEADER_LEN + rows * d * 8;
    let labels = &bytes[values_end..];
    let mut row = vec![0.0; d];
    for (r, chunk) in bytes[HEADER_LEN..values_end].chunks_exact(d * 8).enumerate() {
        for (x, b) in row.iter_mut().zip(chunk.chunks_exact(8)) {
            *x = f64::from_le_bytes(b.try_into().unwrap());
        }
        ds.push(&row, labels[r])?;
    }
    Ok(ds)
}

/// Write the binary file and its provenance sidecar.
pub fn save_dataset(ds: &CsiDataset, path: &Path) -> Result<(), DatasetIoError> {
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| DatasetIoError::Io { path: p, source }
    };
    fs::write(path, encode_dataset(ds)).map_err(io_err(path))?;
    let side = sidecar_path(path);
    let json = serde_json::to_vec_pretty(&ds.provenance)
        .map_err(|source| DatasetIoError::Sidecar { path: side.clone(), source })?;
    fs::write(&side, json).map_err(io_err(&side))
}

/// Read a dataset; a missing sidecar leaves the provenance empty.
pub fn load_dataset(path: &Path) -> Result<CsiDataset, DatasetIoError> {
    let bytes = fs::read(path).map_err(|source| DatasetIoError::Io { path: path.to_path_buf(), source })?;
    let mut ds = decode_dataset(&bytes)?;
    let side = sidecar_path(path);
    match fs::read(&side) {
        Ok(json) => {
            ds.provenance = serde_json::from_slice::<Provenance>(&json)
                .map_err(|source| DatasetIoError::Sidecar { path: side, source })?;
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => {}
        Err(source) => return Err(DatasetIoError::Io { path: side, source }),
    }
    Ok(ds)
}
