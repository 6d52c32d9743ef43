use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;
use std::f64::consts::PI;

use super::rng::{complex_gaussian, keyed_rng, Stream};
use super::{Motion, ScenarioConfig, SimError};
use crate::lte_phy::{crs_positions, CellConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPath {
    pub gain: Complex64,
    pub delay_s: f64,
    pub doppler_hz: f64,
}

/// One snapshot's channel: `a0 + sum_l a_l exp(-j2 pi f tau_l) exp(j2 pi nu_l t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelRealization {
    pub label: u8,
    pub persons: u32,
    /// Persons inside the line-of-sight shadow for this snapshot.
    pub shadowing_persons: u32,
    pub direct_gain: f64,
    pub paths: Vec<ScatterPath>,
    pub time_s: f64,
}

/// Simulator ground truth at the CRS positions of slot 0, symbol 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub label: u8,
    pub crs_response: Vec<Complex64>,
    pub channel: ChannelRealization,
}

impl ChannelRealization {
    /// Frequency response at baseband offset `freq_hz`, evaluated at the
    /// snapshot time.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        self.response_at(freq_hz, self.time_s)
    }

    pub fn response_at(&self, freq_hz: f64, time_s: f64) -> Complex64 {
        let scatter: Complex64 = self
            .paths
            .iter()
            .map(|p| {
                let phase = -2.0 * PI * freq_hz * p.delay_s + 2.0 * PI * p.doppler_hz * time_s;
                p.gain * Complex64::from_polar(1.0, phase)
            })
            .sum();
        Complex64::new(self.direct_gain, 0.0) + scatter
    }

    /// Response on every subcarrier of the `n_rb * 12` grid.
    pub fn grid_response(&self, cell: &CellConfig) -> Vec<Complex64> {
        (0..cell.n_subcarriers()).map(|k| self.response(cell.subcarrier_frequency(k))).collect()
    }

    pub fn ground_truth(&self, cell: &CellConfig) -> Result<GroundTruth, SimError> {
        let positions = crs_positions(cell, 0, 0)?;
        Ok(GroundTruth {
            label: self.label,
            crs_response: positions.iter().map(|&k| self.response(cell.subcarrier_frequency(k))).collect(),
            channel: self.clone(),
        })
    }
}

/// Draw the channel of one snapshot of one category.
pub fn synth_channel(
    cfg: &ScenarioConfig,
    category_index: usize,
    snapshot_index: usize,
) -> Result<ChannelRealization, SimError> {
    let persons = cfg.persons(category_index)?;
    let mut rng = keyed_rng(cfg, category_index, snapshot_index, Stream::Channel);

    let shadowing_persons = match cfg.motion {
        Motion::Static => persons,
        Motion::Dynamic if persons == 0 => 0,
        Motion::Dynamic => {
            let b = Binomial::new(u64::from(persons), cfg.block_probability)
                .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
            b.sample(&mut rng) as u32
        }
    };
    let direct_gain = 10f64.powf(-cfg.shadow_db_per_person * f64::from(shadowing_persons) / 20.0);

    let n_paths = (f64::from(cfg.base_paths) + cfg.paths_per_person * f64::from(persons)).round() as usize;
    let path_power = 10f64.powf(cfg.path_power_db / 10.0);
    let decay = cfg.delay_spread_s / 3.0;
    let paths = (0..n_paths)
        .map(|_| {
            let delay_s = rng.random::<f64>() * cfg.delay_spread_s;
            let power = path_power * (-delay_s / decay).exp();
            let gain = complex_gaussian(&mut rng, (power / 2.0).sqrt());
            let doppler_hz = match cfg.motion {
                Motion::Static => 0.0,
                Motion::Dynamic => (2.0 * rng.random::<f64>() - 1.0) * cfg.doppler_max_hz,
            };
            ScatterPath { gain, delay_s, doppler_hz }
        })
        .collect();

    Ok(ChannelRealization {
        label: cfg.label(category_index),
        persons,
        shadowing_persons,
        direct_gain,
        paths,
        time_s: snapshot_index as f64 * cfg.snapshot_interval_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_direct_path_is_flat() {
        let cfg = ScenarioConfig { categories: vec![0], base_paths: 0, paths_per_person: 7.0, ..Default::default() };
        let ch = synth_channel(&cfg, 0, 3).unwrap();
        assert!(ch.paths.is_empty());
        let cell = CellConfig::default();
        for h in ch.grid_response(&cell) {
            assert_eq!(h.norm(), 1.0);
        }
    }

    #[test]
    fn path_count_grows_with_crowd() {
        let cfg = ScenarioConfig::default();
        let counts: Vec<usize> = (0..8).map(|c| synth_channel(&cfg, c, 0).unwrap().paths.len()).collect();
        assert_eq!(counts, vec![3, 4, 5, 7, 8, 10, 11, 13]);
    }

    #[test]
    fn deterministic_per_key() {
        let cfg = ScenarioConfig { motion: Motion::Dynamic, ..Default::default() };
        assert_eq!(synth_channel(&cfg, 4, 17).unwrap(), synth_channel(&cfg, 4, 17).unwrap());
        assert_ne!(synth_channel(&cfg, 4, 17).unwrap(), synth_channel(&cfg, 4, 18).unwrap());
    }

    #[test]
    fn static_channel_does_not_evolve() {
        let cfg = ScenarioConfig::default();
        let ch = synth_channel(&cfg, 7, 5).unwrap();
        assert!(ch.paths.iter().all(|p| p.doppler_hz == 0.0));
        assert_eq!(ch.shadowing_persons, 19);
        for f in [-4.0e6, 0.0, 2.5e6] {
            assert_eq!(ch.response_at(f, 0.0), ch.response_at(f, 0.37));
        }
    }

    #[test]
    fn dynamic_doppler_within_bounds() {
        let cfg = ScenarioConfig { motion: Motion::Dynamic, ..Default::default() };
        for s in 0..50 {
            let ch = synth_channel(&cfg, 7, s).unwrap();
            assert!(ch.shadowing_persons <= 19);
            assert!(ch.paths.iter().all(|p| p.doppler_hz.abs() <= 10.0));
            assert!(ch.paths.iter().all(|p| p.delay_s >= 0.0));
            assert!(ch.paths.iter().all(|p| p.delay_s < 1e-6));
        }
    }

    #[test]
    fn out_of_range_category() {
        let cfg = ScenarioConfig::default();
        assert_eq!(synth_channel(&cfg, 8, 0), Err(SimError::CategoryOutOfRange { index: 8, count: 8 }));
    }
}
