use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;

use crate::array::UlaArray;
use crate::error::{config_err, Result};
use crate::C64;

/// Sorted list of angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    pub angles: Vec<f64>,
}

impl AngleGrid {
    /// `theta_g = -pi/2 + pi (g - 1) / G`, `g = 1..G`.
    pub fn synthesis(g: usize) -> Result<Self> {
        if g == 0 {
            return config_err("synthesis grid needs at least one point");
        }
        Ok(Self { angles: (0..g).map(|i| -FRAC_PI_2 + PI * i as f64 / g as f64).collect() })
    }

    /// `start, start + step, ...` up to and including `stop` (to 1e-9 of a step).
    pub fn uniform(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || stop < start {
            return config_err(format!("bad angle range [{start}, {stop}] step {step}"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok(Self { angles: (0..n).map(|i| start + step * i as f64).collect() })
    }

    pub fn uniform_deg(start: f64, stop: f64, step: f64) -> Result<Self> {
        Self::uniform(start.to_radians(), stop.to_radians(), step.to_radians())
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Spacing between the first two points (zero for a single point).
    pub fn step(&self) -> f64 {
        if self.angles.len() < 2 {
            0.0
        } else {
            self.angles[1] - self.angles[0]
        }
    }
}

/// `N_a x G` matrix whose column `g` is the steering vector at `theta_g`.
pub fn array_factor_matrix(arr: &UlaArray, grid: &AngleGrid) -> DMatrix<C64> {
    arr.steering_matrix(&grid.angles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthesis_grid_points() {
        let g = AngleGrid::synthesis(181).unwrap();
        assert_eq!(g.len(), 181);
        assert_eq!(g.angles[0], -FRAC_PI_2);
        assert!((g.angles[90] - (-FRAC_PI_2 + PI * 90.0 / 181.0)).abs() < 1e-15);
        assert!(g.angles.windows(2).all(|w| (w[1] - w[0] - PI / 181.0).abs() < 1e-12));
    }

    #[test]
    fn uniform_includes_endpoint() {
        let g = AngleGrid::uniform_deg(-45.0, 45.0, 1.0).unwrap();
        assert_eq!(g.len(), 91);
        assert!((g.angles[90] - 45f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn array_factor_columns() {
        let arr = UlaArray::new(4).unwrap();
        let grid = AngleGrid::uniform_deg(-60.0, 60.0, 120.0 / 7.0).unwrap();
        assert_eq!(grid.len(), 8);
        let a = array_factor_matrix(&arr, &grid);
        for j in 0..8 {
            assert!((a.column(j).norm() - 2.0).abs() < 1e-12);
        }
        let with_zero = AngleGrid { angles: vec![0.0] };
        assert!(array_factor_matrix(&arr, &with_zero).iter().all(|v| (v - C64::new(1.0, 0.0)).norm() < 1e-15));
        let gram = a.adjoint() * &a;
        for i in 0..8 {
            for j in 0..8 {
                let mut acc = C64::new(0.0, 0.0);
                for n in 0..4 {
                    acc += C64::from_polar(1.0, n as f64 * PI * (grid.angles[j].sin() - grid.angles[i].sin()));
                }
                assert!((gram[(i, j)] - acc).norm() < 1e-12);
            }
        }
    }
}
