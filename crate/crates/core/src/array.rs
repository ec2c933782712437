//! Uniform linear array with half-wavelength spacing.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, domain_err, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UlaArray {
    pub n_antennas: usize,
}

impl UlaArray {
    pub fn new(n_antennas: usize) -> Result<Self> {
        if n_antennas == 0 {
            return config_err("array needs at least one element");
        }
        Ok(Self { n_antennas })
    }

    /// `a_n(phi) = e^{j (n-1) pi sin(phi)}`, `phi` in `[-pi/2, pi/2]`.
    pub fn steering_vector(&self, phi: f64) -> Result<DVector<C64>> {
        check_angle(phi)?;
        Ok(self.steering_unchecked(phi))
    }

    pub(crate) fn steering_unchecked(&self, phi: f64) -> DVector<C64> {
        let s = PI * phi.sin();
        DVector::from_fn(self.n_antennas, |n, _| C64::from_polar(1.0, n as f64 * s))
    }

    /// `d a / d phi = j pi cos(phi) (n-1) a_n(phi)`.
    pub fn steering_derivative(&self, phi: f64) -> Result<DVector<C64>> {
        check_angle(phi)?;
        let a = self.steering_unchecked(phi);
        let c = PI * phi.cos();
        Ok(DVector::from_fn(self.n_antennas, |n, _| a[n] * C64::new(0.0, c * n as f64)))
    }

    /// Columns are steering vectors at the given angles.
    pub fn steering_matrix(&self, angles: &[f64]) -> DMatrix<C64> {
        let mut a = DMatrix::zeros(self.n_antennas, angles.len());
        for (j, &th) in angles.iter().enumerate() {
            a.set_column(j, &self.steering_unchecked(th));
        }
        a
    }

    /// Antisymmetric index-difference matrix `[B]_{m,m'} = m - m'`.
    pub fn difference_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_antennas, self.n_antennas, |i, j| i as f64 - j as f64)
    }
}

pub(crate) fn check_angle(phi: f64) -> Result<()> {
    if !(phi.is_finite() && phi.abs() <= FRAC_PI_2 + 1e-12) {
        return domain_err(format!("angle {phi} rad outside [-pi/2, pi/2]"));
    }
    Ok(())
}
