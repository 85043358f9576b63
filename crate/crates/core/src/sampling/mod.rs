//! Deterministic quasi-random and space-filling sampling over mixed spaces.

mod direction_numbers;
mod doe;
mod sobol;

pub use doe::initial_doe;
pub use sobol::{sobol_unit, SobolSequence, SOBOL_MAX_DIM};

use crate::error::{Error, Result};
use crate::space::{MixedDesignSpace, MixedPoint};

/// Map a unit-cube row to a mixed point.
///
/// Quantitative coordinates are scaled affinely. A qualitative coordinate
/// picks level `floor(u * l) + 1` (clamped to `l`), so every level has mass
/// exactly `1 / l` under uniform `u`.
pub fn unit_to_mixed(u: &[f64], space: &MixedDesignSpace) -> Result<MixedPoint> {
    if u.len() != space.dim() {
        return Err(Error::DimensionMismatch {
            what: "unit sample row",
            expected: space.dim(),
            found: u.len(),
        });
    }
    let q = space.q();
    let x = space
        .quantitative()
        .iter()
        .zip(&u[..q])
        .map(|(v, &ui)| v.lower + ui * (v.upper - v.lower))
        .collect();
    let t = space
        .qualitative()
        .iter()
        .zip(&u[q..])
        .map(|(v, &ui)| unit_to_level(ui, v.num_levels))
        .collect();
    Ok(MixedPoint::new(x, t))
}

#[inline]
pub fn unit_to_level(u: f64, levels: usize) -> usize {
    let raw = (u * levels as f64).floor();
    if raw < 0.0 {
        1
    } else {
        (raw as usize + 1).min(levels)
    }
}

/// `n` mixed points from a (optionally scrambled) Sobol' sequence.
pub fn sobol_mixed(
    space: &MixedDesignSpace,
    n: usize,
    skip: u64,
    scramble_seed: Option<u64>,
) -> Result<Vec<MixedPoint>> {
    sobol_unit(space.dim(), n, skip, scramble_seed)?
        .iter()
        .map(|u| unit_to_mixed(u, space))
        .collect()
}
