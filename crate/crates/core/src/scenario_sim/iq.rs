use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::rng::{complex_gaussian, keyed_rng, Stream};
use super::{synth_channel, GroundTruth, ScenarioConfig, SimError};
use crate::lte_phy::ofdm::modulate_subframe;
use crate::lte_phy::pss::pss_subcarriers;
use crate::lte_phy::{
    crs_positions, generate_crs, generate_pss, is_crs_symbol, modulate_symbol, CellConfig, IqCapture, ResourceGrid,
    SYMBOLS_PER_SLOT,
};

/// Layout knobs for synthesized captures.
#[derive(Debug, Clone, PartialEq)]
pub struct IqSynthOptions {
    /// Noise-only samples before the PSS symbol; equals the true frame offset.
    pub lead_in: usize,
    /// Noise-only samples after the subframe.
    pub tail: usize,
    /// Carrier frequency offset applied to the whole capture.
    pub cfo_hz: f64,
    pub center_frequency: f64,
}

impl Default for IqSynthOptions {
    fn default() -> Self {
        Self { lead_in: 4096, tail: 256, cfo_hz: 0.0, center_frequency: 2.35e9 }
    }
}

/// One capture (PSS symbol + downlink subframe) through the snapshot's channel.
pub fn synth_iq(
    cfg: &ScenarioConfig,
    cell: &CellConfig,
    category_index: usize,
    snapshot_index: usize,
) -> Result<(IqCapture, GroundTruth), SimError> {
    synth_iq_with(cfg, cell, category_index, snapshot_index, &IqSynthOptions::default())
}

pub fn synth_iq_with(
    cfg: &ScenarioConfig,
    cell: &CellConfig,
    category_index: usize,
    snapshot_index: usize,
    opts: &IqSynthOptions,
) -> Result<(IqCapture, GroundTruth), SimError> {
    cfg.validate()?;
    cell.validate()?;
    let channel = synth_channel(cfg, category_index, snapshot_index)?;
    let truth = channel.ground_truth(cell)?;
    let h = channel.grid_response(cell);
    let zero = Complex64::new(0.0, 0.0);

    let mut sync_row = vec![zero; cell.n_subcarriers()];
    for (k, d) in pss_subcarriers(cell).zip(generate_pss(cell.nid2())?) {
        sync_row[k] = d * h[k];
    }

    let mut payload = keyed_rng(cfg, category_index, snapshot_index, Stream::IqPayload);
    let mut grid = ResourceGrid::subframe(cell);
    for row in 0..grid.n_symbols() {
        let (slot, symbol) = (row / SYMBOLS_PER_SLOT, row % SYMBOLS_PER_SLOT);
        let values = grid.row_mut(row);
        for v in values.iter_mut() {
            let bits: u8 = payload.random_range(0..4);
            let re = if bits & 1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            let im = if bits & 2 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            *v = Complex64::new(re, im);
        }
        if is_crs_symbol(symbol) {
            let pos = crs_positions(cell, slot, symbol)?;
            for (&k, p) in pos.iter().zip(generate_crs(cell, slot, symbol)?) {
                values[k] = p;
            }
        }
        for (v, hk) in values.iter_mut().zip(&h) {
            *v *= hk;
        }
    }

    let mut samples = vec![zero; opts.lead_in];
    samples.extend(modulate_symbol(cell, &sync_row, cell.cp_len(SYMBOLS_PER_SLOT - 1)));
    samples.extend(modulate_subframe(cell, &grid));
    samples.resize(samples.len() + opts.tail, zero);

    if opts.cfo_hz != 0.0 {
        let step = 2.0 * PI * opts.cfo_hz / cell.sample_rate;
        for (i, s) in samples.iter_mut().enumerate() {
            *s *= Complex64::from_polar(1.0, step * i as f64);
        }
    }
    let var = cfg.noise_variance();
    if var > 0.0 {
        let mut noise = keyed_rng(cfg, category_index, snapshot_index, Stream::IqNoise);
        let sigma = (var / 2.0).sqrt();
        for s in samples.iter_mut() {
            *s += complex_gaussian(&mut noise, sigma);
        }
    }

    let capture = IqCapture {
        samples,
        sample_rate: cell.sample_rate,
        center_frequency: opts.center_frequency,
        timestamp: channel.time_s,
        cell_id: cell.cell_id,
        label: Some(truth.label),
    };
    Ok((capture, truth))
}
