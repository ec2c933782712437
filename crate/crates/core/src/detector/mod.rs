//! Discovery mode: GLRT likelihood map over the Doppler-delay-angle grid,
//! OS-CFAR thresholding, local refinement and successive cancellation.

mod cfar;
mod glrt;
mod sequential;

pub use cfar::{
    above_threshold_set, calibrate_alpha, cfar_ratios, false_alarm_rate, os_cfar_threshold, predicted_false_alarm, CfarConfig,
    ThresholdMap, MIN_NEIGHBORS,
};
pub use glrt::{build_likelihood_map, estimate_gain, glrt_statistic, CoarseProjections, LikelihoodMap};
pub use sequential::{detect_all, local_search, reconstruct, refine_local, sic_cancel, DetectLimits, Detection};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::array::UlaArray;
use crate::beamforming::{AngleGrid, ReductionSchedule};
use crate::channel::spatial_factor;
use crate::error::{config_err, Result};
use crate::otfs::OtfsConfig;
use crate::C64;

/// A hypothesised `(nu, tau, phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub nu: f64,
    pub tau: f64,
    pub phi: f64,
}

/// Coarse search grid: Doppler bins `k / (N T)` for `k` in `[-N/2, N/2)`,
/// delay bins `l / (M df)` for `l` in `[0, M)`, and an angle list.
///
/// Cells are flattened as `(i_nu * n_tau + i_tau) * n_phi + i_phi`, so the
/// lowest flat index is also the lowest lexicographic `(nu, tau, phi)` index.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid {
    pub doppler: Vec<f64>,
    pub delay: Vec<f64>,
    pub angle: Vec<f64>,
}

impl SearchGrid {
    pub fn new(cfg: &OtfsConfig, angles: &AngleGrid) -> Result<Self> {
        if angles.is_empty() {
            return config_err("angle search grid is empty");
        }
        let n = cfg.n() as i64;
        let doppler = (-(n / 2)..n - n / 2).map(|k| k as f64 * cfg.doppler_bin()).collect();
        let delay = (0..cfg.m()).map(|l| l as f64 * cfg.delay_bin()).collect();
        Ok(Self { doppler, delay, angle: angles.angles.clone() })
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.doppler.len(), self.delay.len(), self.angle.len()]
    }

    pub fn len(&self) -> usize {
        self.doppler.len() * self.delay.len() * self.angle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: [usize; 3]) -> usize {
        let [_, nt, np] = self.shape();
        (i[0] * nt + i[1]) * np + i[2]
    }

    pub fn unravel(&self, flat: usize) -> [usize; 3] {
        let [_, nt, np] = self.shape();
        [flat / (nt * np), (flat / np) % nt, flat % np]
    }

    pub fn point(&self, i: [usize; 3]) -> Point {
        Point { nu: self.doppler[i[0]], tau: self.delay[i[1]], phi: self.angle[i[2]] }
    }

    /// Spacing per dimension.
    pub fn steps(&self) -> [f64; 3] {
        let s = |v: &[f64]| if v.len() > 1 { v[1] - v[0] } else { 0.0 };
        [s(&self.doppler), s(&self.delay), s(&self.angle)]
    }
}

/// Known quantities shared by every hypothesis: frame, beams and transmitted symbols.
#[derive(Debug, Clone, Copy)]
pub struct SensingContext<'a> {
    pub cfg: &'a OtfsConfig,
    pub array: &'a UlaArray,
    pub tx: &'a DMatrix<C64>,
    pub schedule: &'a ReductionSchedule,
    /// Per block, the `N_s` stream blocks stacked stream-major.
    pub x: &'a [Vec<C64>],
}

impl SensingContext<'_> {
    pub fn blocks(&self) -> usize {
        self.schedule.blocks()
    }

    pub fn n_streams(&self) -> usize {
        self.tx.ncols()
    }

    /// `U_b^H a(phi) a(phi)^H F` for every block.
    pub fn spatial_factors(&self, phi: f64) -> Vec<DMatrix<C64>> {
        let a = self.array.steering_unchecked(phi);
        self.schedule.matrices.iter().map(|u| spatial_factor(u, self.tx, &a)).collect()
    }

    pub(crate) fn check(&self, y: &[Vec<C64>]) -> Result<()> {
        let nm = self.cfg.nm();
        if y.len() != self.blocks() || self.x.len() != self.blocks() {
            return config_err(format!(
                "{} received and {} transmitted blocks for a {}-block schedule",
                y.len(),
                self.x.len(),
                self.blocks()
            ));
        }
        for (b, (yb, xb)) in y.iter().zip(self.x).enumerate() {
            if yb.len() != self.schedule.matrices[b].ncols() * nm || xb.len() != self.n_streams() * nm {
                return config_err(format!("block {b} has mismatched receive or symbol length"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
