use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::ScenarioConfig;

/// Independent draw streams of one snapshot.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Channel = 1,
    CsiNoise = 2,
    IqPayload = 3,
    IqNoise = 4,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one `(seed, day, category, snapshot, stream)` key.
pub(crate) fn keyed_rng(cfg: &ScenarioConfig, category: usize, snapshot: usize, stream: Stream) -> ChaCha8Rng {
    let mut state = cfg.rng_seed;
    for word in [u64::from(cfg.day_id), category as u64, snapshot as u64, stream as u64] {
        state = splitmix64(&mut state) ^ word;
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Circular complex Gaussian with per-component standard deviation `sigma`.
pub(crate) fn complex_gaussian<R: Rng>(rng: &mut R, sigma: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sigma * re, sigma * im)
}
