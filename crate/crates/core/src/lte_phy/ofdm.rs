use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use super::{CellConfig, IqCapture, PhyError, SyncResult, SLOTS_PER_SUBFRAME, SYMBOLS_PER_SLOT};

/// Demodulated subcarrier values, one row per OFDM symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    n_symbols: usize,
    n_subcarriers: usize,
    /// Slot number (within the radio frame) of the first row.
    pub first_slot: usize,
    data: Vec<Complex64>,
}

impl ResourceGrid {
    pub fn zeros(n_symbols: usize, n_subcarriers: usize) -> Self {
        Self {
            n_symbols,
            n_subcarriers,
            first_slot: 0,
            data: vec![Complex64::new(0.0, 0.0); n_symbols * n_subcarriers],
        }
    }

    /// One downlink subframe (14 symbols) sized for `cfg`.
    pub fn subframe(cfg: &CellConfig) -> Self {
        Self::zeros(SLOTS_PER_SUBFRAME * SYMBOLS_PER_SLOT, cfg.n_subcarriers())
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn row(&self, symbol: usize) -> &[Complex64] {
        &self.data[symbol * self.n_subcarriers..(symbol + 1) * self.n_subcarriers]
    }

    pub fn row_mut(&mut self, symbol: usize) -> &mut [Complex64] {
        &mut self.data[symbol * self.n_subcarriers..(symbol + 1) * self.n_subcarriers]
    }

    /// (slot, symbol-within-slot) of grid row `row`.
    pub fn slot_symbol(&self, row: usize) -> (usize, usize) {
        (self.first_slot + row / SYMBOLS_PER_SLOT, row % SYMBOLS_PER_SLOT)
    }

    pub fn scale(&mut self, factor: Complex64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }
}

/// Unitary inverse FFT of one grid row into an `fft_size` time-domain body.
pub(crate) fn ifft_body(cfg: &CellConfig, row: &[Complex64]) -> Vec<Complex64> {
    let n = cfg.fft_size;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (k, v) in row.iter().enumerate() {
        buf[cfg.fft_bin(k)] = *v;
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let norm = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= norm);
    buf
}

/// Time-domain OFDM symbol (CP followed by body) for one grid row.
pub fn modulate_symbol(cfg: &CellConfig, row: &[Complex64], cp_len: usize) -> Vec<Complex64> {
    let body = ifft_body(cfg, row);
    let mut out = Vec::with_capacity(cp_len + body.len());
    out.extend_from_slice(&body[body.len() - cp_len..]);
    out.extend_from_slice(&body);
    out
}

/// Time-domain samples of a full subframe grid.
pub(crate) fn modulate_subframe(cfg: &CellConfig, grid: &ResourceGrid) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(cfg.subframe_len());
    for l in 0..grid.n_symbols() {
        out.extend(modulate_symbol(cfg, grid.row(l), cfg.cp_len(l)));
    }
    out
}

/// FFT the 14 symbols of the subframe that follows the detected PSS symbol.
///
/// The FFT window is placed `cp/8` samples inside the cyclic prefix and the
/// resulting linear phase is removed, so small early timing errors leave the
/// channel magnitude untouched.
pub fn demodulate_ofdm(capture: &IqCapture, sync: &SyncResult, cfg: &CellConfig) -> Result<ResourceGrid, PhyError> {
    cfg.validate()?;
    capture.validate()?;
    let start = sync.frame_offset + cfg.sync_symbol_len();
    let needed = start + cfg.subframe_len();
    if needed > capture.samples.len() {
        return Err(PhyError::InsufficientSamples { needed, available: capture.samples.len() });
    }

    let n = cfg.fft_size;
    let backoff = cfg.cp_len(1) / 8;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let norm = 1.0 / (n as f64).sqrt();
    let cfo_step = -2.0 * PI * sync.cfo_hz / cfg.sample_rate;
    let ramp: Vec<Complex64> = (0..cfg.n_subcarriers())
        .map(|k| {
            let idx = cfg.subcarrier_frequency(k) / cfg.subcarrier_spacing;
            Complex64::from_polar(norm, 2.0 * PI * idx * backoff as f64 / n as f64)
        })
        .collect();

    let mut grid = ResourceGrid::subframe(cfg);
    let mut pos = start;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for l in 0..grid.n_symbols() {
        let win = pos + cfg.cp_len(l) - backoff;
        for (i, b) in buf.iter_mut().enumerate() {
            let idx = win + i;
            *b = if sync.cfo_hz == 0.0 {
                capture.samples[idx]
            } else {
                capture.samples[idx] * Complex64::from_polar(1.0, cfo_step * idx as f64)
            };
        }
        fft.process(&mut buf);
        for (k, out) in grid.row_mut(l).iter_mut().enumerate() {
            *out = buf[cfg.fft_bin(k)] * ramp[k];
        }
        pos += cfg.cp_len(l) + n;
    }
    Ok(grid)
}
