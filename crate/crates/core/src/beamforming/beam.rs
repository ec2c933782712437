use nalgebra::{DMatrix, DVector};

use crate::array::UlaArray;
use crate::error::{domain_err, Result};
use crate::C64;

use super::AngleGrid;

/// Antenna weights of one beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamVector {
    pub weights: DVector<C64>,
}

impl BeamVector {
    pub fn new(weights: DVector<C64>) -> Self {
        Self { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Same beam rescaled to unit Euclidean norm (unit radiated power).
    pub fn unit_norm(&self) -> DVector<C64> {
        let n = self.weights.norm();
        if n == 0.0 {
            self.weights.clone()
        } else {
            &self.weights / C64::new(n, 0.0)
        }
    }

    /// `|a(theta)^H f|` at arbitrary angles.
    pub fn pattern_at(&self, arr: &UlaArray, angles: &[f64]) -> Vec<f64> {
        pattern_of(self, &arr.steering_matrix(angles))
    }
}

/// `|A^H f|` per column of the array factor matrix.
pub fn pattern_of(f: &BeamVector, a: &DMatrix<C64>) -> Vec<f64> {
    a.ad_mul(&f.weights).iter().map(|v| v.norm()).collect()
}

/// Scales `f` so that `||A^H f||^2 = 1`.
pub fn normalize_power(f: &BeamVector, a: &DMatrix<C64>) -> Result<BeamVector> {
    let p = a.ad_mul(&f.weights).norm();
    if !(p > 0.0 && p.is_finite()) {
        return domain_err("cannot normalise a beam with zero pattern");
    }
    Ok(BeamVector::new(&f.weights / C64::new(p, 0.0)))
}

/// Shifts a boresight beam to `theta_c` in sine space: `f0 .* a(theta_c)`.
pub fn steer_atom(f0: &BeamVector, arr: &UlaArray, theta_c: f64) -> Result<BeamVector> {
    let a = arr.steering_vector(theta_c)?;
    Ok(BeamVector::new(f0.weights.component_mul(&a)))
}

/// Ripple and sidelobe level of a flat-top beam on a dense evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamQuality {
    /// Peak-to-trough variation over the main section, dB.
    pub ripple_db: f64,
    /// Highest sidelobe beyond the transition band relative to the mean main level, dB.
    pub sll_db: f64,
    /// Mean main-section gain, dB.
    pub main_db: f64,
}

impl BeamQuality {
    /// Evaluates on a 0.05 degree grid over `[-90, 90]` degrees.
    pub fn measure(f: &BeamVector, arr: &UlaArray, center: f64, half_width: f64, transition: f64) -> Self {
        let grid = AngleGrid::uniform_deg(-90.0, 90.0, 0.05).expect("static grid");
        let p = f.pattern_at(arr, &grid.angles);
        let mut main = Vec::new();
        let mut side = f64::NEG_INFINITY;
        for (th, v) in grid.angles.iter().zip(&p) {
            let db = 20.0 * v.max(1e-300).log10();
            let d = (th - center).abs();
            if d <= half_width {
                main.push(db);
            } else if d > half_width + transition {
                side = side.max(db);
            }
        }
        let hi = main.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = main.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = main.iter().sum::<f64>() / main.len() as f64;
        Self { ripple_db: hi - lo, sll_db: side - mean, main_db: mean }
    }
}
