//! Primary synchronization: Zadoff-Chu generation and timing/CFO search.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use super::ofdm::ifft_body;
use super::{CellConfig, IqCapture, PhyError, DEFAULT_PSS_FLOOR, SYMBOLS_PER_SLOT};

pub const PSS_LEN: usize = 62;
const ZC_ROOTS: [u32; 3] = [25, 29, 34];

/// Outcome of the PSS search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    /// First sample (start of cyclic prefix) of the PSS OFDM symbol.
    pub frame_offset: usize,
    pub nid2: u8,
    pub cfo_hz: f64,
    /// Normalized correlation magnitude in `[0, 1]`.
    pub peak_metric: f64,
}

/// Frequency-domain PSS `d_u(n)` for the root selected by `nid2`.
pub fn generate_pss(nid2: u8) -> Result<Vec<Complex64>, PhyError> {
    let u = *ZC_ROOTS.get(nid2 as usize).ok_or(PhyError::InvalidNid2(nid2))? as f64;
    Ok((0..PSS_LEN)
        .map(|n| {
            let n = n as f64;
            let arg = if n < 31.0 { u * n * (n + 1.0) } else { u * (n + 1.0) * (n + 2.0) };
            Complex64::from_polar(1.0, -PI * arg / 63.0)
        })
        .collect())
}

/// Grid subcarrier indices occupied by the 62 PSS values.
pub(crate) fn pss_subcarriers(cfg: &CellConfig) -> impl Iterator<Item = usize> {
    let first = cfg.n_subcarriers() / 2 - PSS_LEN / 2;
    first..first + PSS_LEN
}

/// Time-domain body (no CP) of a symbol carrying only the PSS.
pub fn pss_time_replica(cfg: &CellConfig, nid2: u8) -> Result<Vec<Complex64>, PhyError> {
    let d = generate_pss(nid2)?;
    let mut row = vec![Complex64::new(0.0, 0.0); cfg.n_subcarriers()];
    for (k, v) in pss_subcarriers(cfg).zip(d) {
        row[k] = v;
    }
    Ok(ifft_body(cfg, &row))
}

/// Search all offsets and all three `nid2` hypotheses with the default floor.
pub fn detect_pss(capture: &IqCapture, cfg: &CellConfig) -> Result<SyncResult, PhyError> {
    detect_pss_with_floor(capture, cfg, DEFAULT_PSS_FLOOR)
}

pub fn detect_pss_with_floor(capture: &IqCapture, cfg: &CellConfig, floor: f64) -> Result<SyncResult, PhyError> {
    cfg.validate()?;
    capture.validate()?;
    let r = &capture.samples;
    let n = cfg.fft_size;
    let cp = cfg.cp_len(SYMBOLS_PER_SLOT - 1);
    if r.len() < cp + n {
        return Err(PhyError::InsufficientSamples { needed: cp + n, available: r.len() });
    }

    let mut prefix = Vec::with_capacity(r.len() + 1);
    prefix.push(0.0f64);
    let mut acc = 0.0;
    for s in r {
        acc += s.norm_sqr();
        prefix.push(acc);
    }
    let n_offsets = r.len() - n + 1;
    let window_energy: Vec<f64> = (0..n_offsets).map(|m| (prefix[m + n] - prefix[m]).max(0.0)).collect();
    let energy_floor = 1e-12 * window_energy.iter().cloned().fold(0.0, f64::max);

    let size = (r.len() + n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut spectrum = r.clone();
    spectrum.resize(size, Complex64::new(0.0, 0.0));
    fwd.process(&mut spectrum);

    let mut best: Option<(f64, usize, u8)> = None;
    for nid2 in 0..3u8 {
        let replica = pss_time_replica(cfg, nid2)?;
        let replica_energy: f64 = replica.iter().map(|v| v.norm_sqr()).sum();
        let mut p = replica;
        p.resize(size, Complex64::new(0.0, 0.0));
        fwd.process(&mut p);
        let mut corr: Vec<Complex64> = spectrum.iter().zip(&p).map(|(a, b)| a * b.conj()).collect();
        inv.process(&mut corr);
        let scale = 1.0 / size as f64;
        for m in cp..n_offsets {
            let e = window_energy[m];
            if e <= energy_floor || e == 0.0 {
                continue;
            }
            let metric = (corr[m].norm() * scale / (e * replica_energy).sqrt()).min(1.0);
            if best.is_none_or(|(b, _, _)| metric > b) {
                best = Some((metric, m, nid2));
            }
        }
    }

    let (peak, body_start, nid2) = best.unwrap_or((0.0, cp, 0));
    if !(peak >= floor) {
        return Err(PhyError::NoCellFound { peak, floor });
    }
    let frame_offset = body_start - cp;
    let cfo_hz = estimate_cfo(r, frame_offset, cp, n, cfg.subcarrier_spacing);
    Ok(SyncResult { frame_offset, nid2, cfo_hz, peak_metric: peak })
}

/// Fractional CFO from the CP autocorrelation of one symbol. The outer
/// eighth of the CP on each side is skipped so a timing error of a few
/// samples does not mix in the neighbouring symbols.
fn estimate_cfo(r: &[Complex64], start: usize, cp: usize, n: usize, spacing: f64) -> f64 {
    let guard = cp / 8;
    let acc: Complex64 =
        (guard..cp - guard).filter(|i| start + i + n < r.len()).map(|i| r[start + i].conj() * r[start + i + n]).sum();
    if acc.norm() == 0.0 {
        return 0.0;
    }
    acc.arg() * spacing / (2.0 * PI)
}
