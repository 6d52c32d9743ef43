//! LTE downlink physical-layer receive chain.
//!
//! A capture is processed the way a passive UE would: find the primary
//! synchronization signal, strip cyclic prefixes and FFT each OFDM symbol,
//! then divide the received cell-specific reference signals by their known
//! pilot values to obtain a least-squares channel estimate.
//!
//! The capture layout produced by the simulator and expected by the
//! demodulator is one PSS-bearing OFDM symbol (normal CP) immediately
//! followed by one 14-symbol downlink subframe.

mod crs;
mod estimate;
pub mod iq_file;
pub(crate) mod ofdm;
pub(crate) mod pss;

pub use crs::{crs_positions, generate_crs, gold_sequence, is_crs_symbol};
pub use estimate::estimate_csi;
pub use ofdm::{demodulate_ofdm, modulate_symbol, ResourceGrid};
pub use pss::{detect_pss, detect_pss_with_floor, generate_pss, pss_time_replica, SyncResult};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of subcarriers per resource block.
pub const SUBCARRIERS_PER_RB: usize = 12;
/// OFDM symbols per slot with normal cyclic prefix.
pub const SYMBOLS_PER_SLOT: usize = 7;
/// Slots per subframe.
pub const SLOTS_PER_SUBFRAME: usize = 2;
/// Largest downlink bandwidth in resource blocks; offsets the CRS sequence.
pub const MAX_DL_RB: usize = 110;
/// Default minimum normalized PSS correlation for a cell to be accepted.
pub const DEFAULT_PSS_FLOOR: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhyError {
    #[error("invalid nid2 {0}, expected 0..=2")]
    InvalidNid2(u8),
    #[error("invalid cell configuration: {0}")]
    InvalidConfig(String),
    #[error("symbol {symbol} of slot {slot} carries no port-0 reference signal")]
    NotCrsSymbol { slot: usize, symbol: usize },
    #[error("no cell found (peak correlation {peak:.3} below floor {floor:.3})")]
    NoCellFound { peak: f64, floor: f64 },
    #[error("insufficient samples: need {needed}, capture has {available}")]
    InsufficientSamples { needed: usize, available: usize },
    #[error("degenerate pilot at subcarrier {0}")]
    DegeneratePilot(usize),
    #[error("resource grid has no CRS-bearing symbol")]
    NoCrsSymbol,
    #[error("empty capture")]
    EmptyCapture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CpMode {
    #[default]
    Normal,
    Extended,
}

/// Static description of the observed cell and the receiver's sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellConfig {
    pub cell_id: u16,
    pub n_rb: usize,
    pub fft_size: usize,
    pub subcarrier_spacing: f64,
    pub sample_rate: f64,
    pub cp_mode: CpMode,
    pub antenna_port: u8,
}

impl Default for CellConfig {
    /// 10 MHz carrier: 50 resource blocks sampled at 15.36 MS/s.
    fn default() -> Self {
        Self {
            cell_id: 0,
            n_rb: 50,
            fft_size: 1024,
            subcarrier_spacing: 15_000.0,
            sample_rate: 15.36e6,
            cp_mode: CpMode::Normal,
            antenna_port: 0,
        }
    }
}

impl CellConfig {
    pub fn with_cell_id(cell_id: u16) -> Self {
        Self { cell_id, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), PhyError> {
        let bad = |msg: String| Err(PhyError::InvalidConfig(msg));
        if self.cell_id > 503 {
            return bad(format!("cell_id {} outside 0..=503", self.cell_id));
        }
        if self.n_rb == 0 || self.n_rb > MAX_DL_RB {
            return bad(format!("n_rb {} outside 1..={MAX_DL_RB}", self.n_rb));
        }
        if !self.fft_size.is_multiple_of(128) || self.n_subcarriers() >= self.fft_size {
            return bad(format!("fft_size {} cannot hold {} subcarriers plus DC", self.fft_size, self.n_subcarriers()));
        }
        if !(self.subcarrier_spacing > 0.0) {
            return bad("subcarrier_spacing must be positive".into());
        }
        let expected = self.fft_size as f64 * self.subcarrier_spacing;
        if (self.sample_rate - expected).abs() > 1e-6 * expected {
            return bad(format!("sample_rate {} != fft_size * subcarrier_spacing = {expected}", self.sample_rate));
        }
        if self.cp_mode != CpMode::Normal {
            return bad("only normal cyclic prefix is supported".into());
        }
        if self.antenna_port != 0 {
            return bad("only antenna port 0 is supported".into());
        }
        Ok(())
    }

    pub fn nid2(&self) -> u8 {
        (self.cell_id % 3) as u8
    }

    /// CRS frequency shift `cell_id mod 6`.
    pub fn v_shift(&self) -> usize {
        self.cell_id as usize % 6
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_rb * SUBCARRIERS_PER_RB
    }

    /// Cyclic prefix length of symbol `l` within a slot.
    pub fn cp_len(&self, l: usize) -> usize {
        if l.is_multiple_of(SYMBOLS_PER_SLOT) {
            self.fft_size * 160 / 2048
        } else {
            self.fft_size * 144 / 2048
        }
    }

    pub fn slot_len(&self) -> usize {
        (0..SYMBOLS_PER_SLOT).map(|l| self.cp_len(l) + self.fft_size).sum()
    }

    pub fn subframe_len(&self) -> usize {
        SLOTS_PER_SUBFRAME * self.slot_len()
    }

    /// Length of the PSS-bearing symbol that precedes the subframe.
    pub fn sync_symbol_len(&self) -> usize {
        self.cp_len(SYMBOLS_PER_SLOT - 1) + self.fft_size
    }

    /// FFT bin of grid subcarrier `k`; the DC bin is never used.
    pub fn fft_bin(&self, k: usize) -> usize {
        let half = self.n_subcarriers() / 2;
        if k < half {
            self.fft_size - half + k
        } else {
            k - half + 1
        }
    }

    /// Baseband frequency offset of grid subcarrier `k` in Hz.
    pub fn subcarrier_frequency(&self, k: usize) -> f64 {
        let half = (self.n_subcarriers() / 2) as i64;
        let k = k as i64;
        let index = if k < half { k - half } else { k - half + 1 };
        index as f64 * self.subcarrier_spacing
    }
}

/// Raw complex baseband samples plus radio metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct IqCapture {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub center_frequency: f64,
    pub timestamp: f64,
    pub cell_id: u16,
    pub label: Option<u8>,
}

impl IqCapture {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Self {
        Self { samples, sample_rate, center_frequency: 2.35e9, timestamp: 0.0, cell_id: 0, label: None }
    }

    pub fn validate(&self) -> Result<(), PhyError> {
        if self.samples.is_empty() {
            return Err(PhyError::EmptyCapture);
        }
        if !(self.sample_rate > 0.0) {
            return Err(PhyError::InvalidConfig("sample_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Magnitude of the channel estimate at the CRS positions of one subframe.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiVector {
    pub values: Vec<f64>,
    pub capture_id: Option<String>,
    pub label: Option<u8>,
}

impl CsiVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, capture_id: None, label: None }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Synchronize, demodulate and estimate in one call. The capture's label
/// is carried into the result.
pub fn extract_csi(capture: &IqCapture, cfg: &CellConfig) -> Result<CsiVector, PhyError> {
    let sync = detect_pss(capture, cfg)?;
    let grid = demodulate_ofdm(capture, &sync, cfg)?;
    let mut csi = estimate_csi(&grid, cfg)?;
    csi.label = capture.label;
    Ok(csi)
}
