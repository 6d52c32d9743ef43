use num_complex::Complex64;

use super::{crs_positions, generate_crs, CellConfig, CsiVector, PhyError, ResourceGrid};

const PILOT_UNDERFLOW: f64 = 1e-12;

/// Least-squares CSI at the port-0 pilots of the grid's first CRS symbol.
///
/// `Y/P` is averaged coherently over every symbol that carries pilots on the
/// same subcarriers (symbol 0 of each slot); the magnitude is returned.
pub fn estimate_csi(grid: &ResourceGrid, cfg: &CellConfig) -> Result<CsiVector, PhyError> {
    if grid.n_subcarriers() != cfg.n_subcarriers() {
        return Err(PhyError::InvalidConfig(format!(
            "grid has {} subcarriers, cell expects {}",
            grid.n_subcarriers(),
            cfg.n_subcarriers()
        )));
    }
    let mut acc = vec![Complex64::new(0.0, 0.0); 2 * cfg.n_rb];
    let mut used = 0usize;
    for row in 0..grid.n_symbols() {
        let (slot, symbol) = grid.slot_symbol(row);
        if symbol != 0 {
            continue;
        }
        let positions = crs_positions(cfg, slot, symbol)?;
        let pilots = generate_crs(cfg, slot, symbol)?;
        let y = grid.row(row);
        for ((a, &k), p) in acc.iter_mut().zip(&positions).zip(&pilots) {
            if p.norm() < PILOT_UNDERFLOW {
                return Err(PhyError::DegeneratePilot(k));
            }
            *a += y[k] / p;
        }
        used += 1;
    }
    if used == 0 {
        return Err(PhyError::NoCrsSymbol);
    }
    let inv = 1.0 / used as f64;
    Ok(CsiVector::new(acc.iter().map(|h| (h * inv).norm()).collect()))
}
