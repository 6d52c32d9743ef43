//! Crowd-channel simulator.
//!
//! Each snapshot draws a fresh multipath channel: a direct path whose
//! amplitude drops with every person standing in the line-of-sight shadow,
//! plus `round(L0 + beta * N)` diffuse scatter paths. Every draw comes from
//! a generator keyed by `(rng_seed, day_id, category, snapshot)`, so any
//! snapshot can be regenerated in isolation and parallel generation is
//! bit-identical to serial generation.

mod channel;
mod iq;
mod rng;

pub use channel::{synth_channel, ChannelRealization, GroundTruth, ScatterPath};
pub use iq::{synth_iq, synth_iq_with, IqSynthOptions};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{CsiDataset, DatasetError, Provenance, MAX_CATEGORY};
use crate::lte_phy::{CellConfig, PhyError};
use rng::{keyed_rng, Stream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("category index {index} out of range (scenario has {count})")]
    CategoryOutOfRange { index: usize, count: usize },
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    #[default]
    Static,
    Dynamic,
}

impl Motion {
    pub fn as_str(&self) -> &'static str {
        match self {
            Motion::Static => "static",
            Motion::Dynamic => "dynamic",
        }
    }
}

impl std::fmt::Display for Motion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Person counts of the eight occupancy categories.
pub const DEFAULT_CATEGORIES: [u32; 8] = [0, 1, 4, 7, 10, 13, 16, 19];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Persons present in each category; category `i` gets label `i + 1`.
    pub categories: Vec<u32>,
    pub snapshots_per_category: usize,
    pub motion: Motion,
    /// Scatter paths present with nobody around (`L0`).
    pub base_paths: u32,
    /// Extra scatter paths per person (`beta`).
    pub paths_per_person: f64,
    pub delay_spread_s: f64,
    /// Doppler bound for dynamic crowds.
    pub doppler_max_hz: f64,
    /// Per-resource-element SNR; `"inf"` disables noise.
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    /// Mean power of a scatter path at zero excess delay.
    pub path_power_db: f64,
    /// Direct-path attenuation contributed by each shadowing person.
    pub shadow_db_per_person: f64,
    /// Chance that a moving person is inside the line-of-sight shadow.
    pub block_probability: f64,
    /// Time between consecutive snapshots (Doppler phase clock).
    pub snapshot_interval_s: f64,
    pub rng_seed: u64,
    pub day_id: u32,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            categories: DEFAULT_CATEGORIES.to_vec(),
            snapshots_per_category: 1000,
            motion: Motion::Static,
            base_paths: 3,
            paths_per_person: 0.5,
            delay_spread_s: 1e-6,
            doppler_max_hz: 10.0,
            snr_db: 25.0,
            path_power_db: -24.0,
            shadow_db_per_person: 0.5,
            block_probability: 0.98,
            snapshot_interval_s: 0.01,
            rng_seed: 2020,
            day_id: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if self.categories.is_empty() {
            return bad("categories must be nonempty");
        }
        if self.categories.len() > MAX_CATEGORY as usize {
            return bad("at most 8 categories are supported");
        }
        if self.categories.windows(2).any(|w| w[0] >= w[1]) {
            return bad("categories must be strictly increasing");
        }
        if self.snapshots_per_category == 0 {
            return bad("snapshots_per_category must be at least 1");
        }
        if !(self.paths_per_person >= 0.0) || !self.paths_per_person.is_finite() {
            return bad("paths_per_person must be a finite non-negative number");
        }
        if !(self.delay_spread_s > 0.0) || !self.delay_spread_s.is_finite() {
            return bad("delay_spread_s must be positive");
        }
        if !(self.doppler_max_hz >= 0.0) || !self.doppler_max_hz.is_finite() {
            return bad("doppler_max_hz must be non-negative");
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return bad("snr_db must be a number or +inf");
        }
        if !self.path_power_db.is_finite() && self.path_power_db != f64::NEG_INFINITY {
            return bad("path_power_db must be finite");
        }
        if !(self.shadow_db_per_person >= 0.0) || !self.shadow_db_per_person.is_finite() {
            return bad("shadow_db_per_person must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.block_probability) {
            return bad("block_probability must lie in [0, 1]");
        }
        if !(self.snapshot_interval_s >= 0.0) || !self.snapshot_interval_s.is_finite() {
            return bad("snapshot_interval_s must be non-negative");
        }
        Ok(())
    }

    /// Category label (1-based) of category index `i`.
    pub fn label(&self, i: usize) -> u8 {
        i as u8 + 1
    }

    pub fn persons(&self, i: usize) -> Result<u32, SimError> {
        self.categories.get(i).copied().ok_or(SimError::CategoryOutOfRange { index: i, count: self.categories.len() })
    }

    /// Noise variance per resource element, zero when noise is disabled.
    pub fn noise_variance(&self) -> f64 {
        if self.snr_db == f64::INFINITY {
            0.0
        } else {
            10f64.powf(-self.snr_db / 10.0)
        }
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            source: "scenario".into(),
            day_id: Some(self.day_id),
            motion: Some(self.motion),
            rng_seed: Some(self.rng_seed),
        }
    }
}

/// LS averaging over this many pilot symbols divides the per-RE noise.
pub(crate) const PILOT_SYMBOLS_AVERAGED: f64 = 2.0;

/// One noisy CSI snapshot generated directly from the channel, without IQ.
pub fn synth_csi_snapshot(
    cfg: &ScenarioConfig,
    cell: &CellConfig,
    category_index: usize,
    snapshot_index: usize,
) -> Result<(Vec<f64>, GroundTruth), SimError> {
    let channel = synth_channel(cfg, category_index, snapshot_index)?;
    let truth = channel.ground_truth(cell)?;
    let sigma = (cfg.noise_variance() / PILOT_SYMBOLS_AVERAGED / 2.0).sqrt();
    let values = if sigma == 0.0 {
        truth.crs_response.iter().map(|h| h.norm()).collect()
    } else {
        let mut rng = keyed_rng(cfg, category_index, snapshot_index, Stream::CsiNoise);
        truth.crs_response.iter().map(|h| (h + rng::complex_gaussian(&mut rng, sigma)).norm()).collect()
    };
    Ok((values, truth))
}

/// Full labeled CSI dataset, category-major, `snapshots_per_category` rows each.
pub fn synth_csi_dataset(cfg: &ScenarioConfig, cell: &CellConfig) -> Result<CsiDataset, SimError> {
    cfg.validate()?;
    cell.validate()?;
    let per = cfg.snapshots_per_category;
    let total = cfg.categories.len() * per;
    let rows: Vec<(Vec<f64>, u8)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let (c, s) = (i / per, i % per);
            synth_csi_snapshot(cfg, cell, c, s).map(|(v, _)| (v, cfg.label(c)))
        })
        .collect::<Result<_, _>>()?;
    let mut ds = CsiDataset::from_rows(2 * cell.n_rb, rows)?;
    ds.provenance = cfg.provenance();
    Ok(ds)
}

mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid snr_db {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize) -> ScenarioConfig {
        ScenarioConfig { snapshots_per_category: n, ..Default::default() }
    }

    #[test]
    fn default_dataset_shape() {
        let cfg = ScenarioConfig::default();
        let ds = synth_csi_dataset(&cfg, &CellConfig::default()).unwrap();
        assert_eq!(ds.len(), 8000);
        assert_eq!(ds.dim(), 100);
        assert_eq!(ds.category_counts(), [1000; 8]);
    }

    #[test]
    fn noiseless_direct_path_is_all_ones() {
        let cfg = ScenarioConfig { categories: vec![0], base_paths: 0, snr_db: f64::INFINITY, ..small(5) };
        let ds = synth_csi_dataset(&cfg, &CellConfig::default()).unwrap();
        assert!(ds.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn dataset_is_deterministic() {
        let cfg = small(20);
        let cell = CellConfig::default();
        assert_eq!(synth_csi_dataset(&cfg, &cell).unwrap(), synth_csi_dataset(&cfg, &cell).unwrap());
    }

    #[test]
    fn parallel_matches_serial() {
        let cfg = ScenarioConfig { motion: Motion::Dynamic, ..small(30) };
        let cell = CellConfig::with_cell_id(5);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = pool.install(|| synth_csi_dataset(&cfg, &cell).unwrap());
        let parallel = synth_csi_dataset(&cfg, &cell).unwrap();
        assert_eq!(serial.values(), parallel.values());
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut c = ScenarioConfig::default();
        c.categories = vec![];
        assert!(c.validate().is_err());
        c.categories = vec![1, 1];
        assert!(c.validate().is_err());
        let c = ScenarioConfig { snapshots_per_category: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = ScenarioConfig { paths_per_person: -0.1, ..Default::default() };
        assert!(c.validate().is_err());
        let c = ScenarioConfig { snr_db: f64::NAN, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_rejects_unknown_keys_and_reads_infinite_snr() {
        let err = serde_json::from_str::<ScenarioConfig>(r#"{"colour":"red"}"#);
        assert!(err.is_err());
        let cfg: ScenarioConfig = serde_json::from_str(r#"{"snr_db":"inf","motion":"dynamic"}"#).unwrap();
        assert_eq!(cfg.snr_db, f64::INFINITY);
        assert_eq!(cfg.motion, Motion::Dynamic);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioConfig>(&text).unwrap(), cfg);
    }
}
