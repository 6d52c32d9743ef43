//! Raw IQ files: interleaved little-endian `f32` pairs plus a JSON sidecar.
//!
//! `capture.iq` is accompanied by `capture.meta.json`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

use super::IqCapture;

#[derive(Debug, Error)]
pub enum IqFileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: length {len} is not a multiple of 8 bytes")]
    Misaligned { path: PathBuf, len: usize },
    #[error("{path}: no samples")]
    Empty { path: PathBuf },
    #[error("{path}: bad sidecar: {source}")]
    Sidecar { path: PathBuf, source: serde_json::Error },
    #[error("{path}: sample_rate must be positive")]
    BadSampleRate { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IqMeta {
    pub sample_rate: f64,
    pub center_frequency: f64,
    pub cell_id: u16,
    pub timestamp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn encode_samples(samples: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 8);
    for s in samples {
        out.extend_from_slice(&(s.re as f32).to_le_bytes());
        out.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    out
}

pub fn decode_samples(bytes: &[u8]) -> Option<Vec<Complex64>> {
    if !bytes.len().is_multiple_of(8) {
        return None;
    }
    Some(
        bytes
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                Complex64::new(f64::from(re), f64::from(im))
            })
            .collect(),
    )
}

pub fn write_iq(path: &Path, capture: &IqCapture) -> Result<(), IqFileError> {
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| IqFileError::Io { path: p, source }
    };
    fs::write(path, encode_samples(&capture.samples)).map_err(io_err(path))?;
    let meta = IqMeta {
        sample_rate: capture.sample_rate,
        center_frequency: capture.center_frequency,
        cell_id: capture.cell_id,
        timestamp: capture.timestamp,
        label: capture.label,
    };
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
    fs::write(&side, json + "\n").map_err(io_err(&side))
}

pub fn read_iq(path: &Path) -> Result<IqCapture, IqFileError> {
    let bytes = fs::read(path).map_err(|source| IqFileError::Io { path: path.into(), source })?;
    let samples = decode_samples(&bytes).ok_or(IqFileError::Misaligned { path: path.into(), len: bytes.len() })?;
    if samples.is_empty() {
        return Err(IqFileError::Empty { path: path.into() });
    }
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|source| IqFileError::Io { path: side.clone(), source })?;
    let meta: IqMeta =
        serde_json::from_str(&text).map_err(|source| IqFileError::Sidecar { path: side.clone(), source })?;
    if !(meta.sample_rate > 0.0) {
        return Err(IqFileError::BadSampleRate { path: side });
    }
    Ok(IqCapture {
        samples,
        sample_rate: meta.sample_rate,
        center_frequency: meta.center_frequency,
        timestamp: meta.timestamp,
        cell_id: meta.cell_id,
        label: meta.label,
    })
}
