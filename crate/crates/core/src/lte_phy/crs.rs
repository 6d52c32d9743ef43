//! Cell-specific reference signals for antenna port 0, normal CP.

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use super::{CellConfig, PhyError, MAX_DL_RB, SYMBOLS_PER_SLOT};

/// Fast-forward applied to the Gold generator before output.
const GOLD_NC: usize = 1600;
const SLOTS_PER_FRAME: usize = 20;

/// Port 0 carries pilots in symbols 0 and 4 of every slot (normal CP).
pub fn is_crs_symbol(symbol: usize) -> bool {
    symbol == 0 || symbol == SYMBOLS_PER_SLOT - 3
}

fn check_symbol(slot: usize, symbol: usize) -> Result<(), PhyError> {
    if slot >= SLOTS_PER_FRAME || !is_crs_symbol(symbol) {
        return Err(PhyError::NotCrsSymbol { slot, symbol });
    }
    Ok(())
}

/// Subcarrier indices (into the `n_rb * 12` grid) of the port-0 pilots.
pub fn crs_positions(cfg: &CellConfig, slot: usize, symbol: usize) -> Result<Vec<usize>, PhyError> {
    check_symbol(slot, symbol)?;
    let shift = (3 * usize::from(symbol != 0) + cfg.cell_id as usize) % 6;
    Ok((0..2 * cfg.n_rb).map(|m| 6 * m + shift).collect())
}

/// Length-31 Gold sequence `c(n)`, `n = 0..len`, for initial state `c_init`.
pub fn gold_sequence(c_init: u32, len: usize) -> Vec<u8> {
    let total = GOLD_NC + len;
    let mut x1 = vec![0u8; total + 31];
    let mut x2 = vec![0u8; total + 31];
    x1[0] = 1;
    for (i, bit) in x2.iter_mut().take(31).enumerate() {
        *bit = ((c_init >> i) & 1) as u8;
    }
    for n in 0..total {
        x1[n + 31] = (x1[n + 3] + x1[n]) & 1;
        x2[n + 31] = (x2[n + 3] + x2[n + 2] + x2[n + 1] + x2[n]) & 1;
    }
    (0..len).map(|n| x1[n + GOLD_NC] ^ x2[n + GOLD_NC]).collect()
}

fn crs_c_init(cell_id: u16, slot: usize, symbol: usize) -> u32 {
    let id = u32::from(cell_id);
    let (ns, l) = (slot as u32, symbol as u32);
    (1 << 10) * (7 * (ns + 1) + l + 1) * (2 * id + 1) + 2 * id + 1
}

/// QPSK pilot values in the same order as [`crs_positions`].
pub fn generate_crs(cfg: &CellConfig, slot: usize, symbol: usize) -> Result<Vec<Complex64>, PhyError> {
    check_symbol(slot, symbol)?;
    let c = gold_sequence(crs_c_init(cfg.cell_id, slot, symbol), 4 * MAX_DL_RB);
    let offset = MAX_DL_RB - cfg.n_rb;
    Ok((0..2 * cfg.n_rb)
        .map(|m| {
            let mp = m + offset;
            let re = 1.0 - 2.0 * f64::from(c[2 * mp]);
            let im = 1.0 - 2.0 * f64::from(c[2 * mp + 1]);
            Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
        })
        .collect())
}
