//! Transmit and receive beam design: flat-top synthesis, the steered
//! codebook, and per-block reduction-matrix schedules with the DFT and
//! antenna-selection baselines.

mod beam;
mod codebook;
mod fista;
mod grid;
mod mask;
mod schedule;

pub use beam::{normalize_power, pattern_of, steer_atom, BeamQuality, BeamVector};
pub use codebook::{build_codebook, Atom, Codebook};
pub use fista::{shrink, synth_fista, FistaOutcome, FistaParams};
pub use grid::{array_factor_matrix, AngleGrid};
pub use mask::{BeamMask, Region};
pub use schedule::{build_schedule, ReductionSchedule, ScheduleStrategy};

use crate::array::UlaArray;
use crate::error::Result;

/// Flat-top beam centred at `center` with total width `width` (radians), synthesised on `grid`.
pub fn design_flat_top(
    arr: &UlaArray,
    grid: &AngleGrid,
    center: f64,
    width: f64,
    transition: f64,
    sll_db: f64,
    params: &FistaParams,
) -> Result<FistaOutcome> {
    let mask = BeamMask::flat_top(grid, center, width / 2.0, transition, sll_db)?;
    synth_fista(&mask, arr, grid, params)
}
