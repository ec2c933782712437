use nalgebra::DMatrix;

use crate::array::UlaArray;
use crate::error::{config_err, Result};
use crate::C64;

use super::{normalize_power, steer_atom, BeamVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub coarse: usize,
    pub fine: usize,
    pub center: f64,
    pub beam: BeamVector,
}

/// Steered copies of one boresight beam; atom `(i, j)` is centred at
/// `fov_min + i * dtheta + j * ddtheta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub atoms: Vec<Atom>,
    pub fov: (f64, f64),
    pub dtheta: f64,
    pub ddtheta: f64,
    pub n_coarse: usize,
    pub n_fine: usize,
}

fn integer_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    let r = num / den;
    if !(r.is_finite() && r >= 1.0 - 1e-9 && (r - r.round()).abs() < 1e-9) {
        return config_err(format!("{what} must be an integer, got {r}"));
    }
    Ok(r.round() as usize)
}

/// Builds the codebook; every atom satisfies `||A^H u||^2 = 1` for the given array factor matrix.
pub fn build_codebook(
    arr: &UlaArray,
    a: &DMatrix<C64>,
    fov: (f64, f64),
    dtheta: f64,
    ddtheta: f64,
    f0: &BeamVector,
) -> Result<Codebook> {
    let n_coarse = integer_ratio(fov.1 - fov.0, dtheta, "field of view / coarse step")?;
    let n_fine = integer_ratio(dtheta, ddtheta, "coarse step / fine step")?;
    let mut atoms = Vec::with_capacity(n_coarse * n_fine);
    for i in 0..n_coarse {
        for j in 0..n_fine {
            let center = fov.0 + i as f64 * dtheta + j as f64 * ddtheta;
            let beam = normalize_power(&steer_atom(f0, arr, center)?, a)?;
            atoms.push(Atom { coarse: i, fine: j, center, beam });
        }
    }
    Ok(Codebook { atoms, fov, dtheta, ddtheta, n_coarse, n_fine })
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `|u_p^H u_q| / (||u_p|| ||u_q||)`.
    pub fn overlap(&self, p: usize, q: usize) -> f64 {
        let (u, v) = (&self.atoms[p].beam.weights, &self.atoms[q].beam.weights);
        u.dotc(v).norm() / (u.norm() * v.norm())
    }

    pub fn label(&self, p: usize) -> String {
        format!("({},{})", self.atoms[p].coarse, self.atoms[p].fine)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::{array_factor_matrix, design_flat_top, AngleGrid, FistaParams};

    pub(crate) fn atom_codebook() -> (UlaArray, DMatrix<C64>, Codebook) {
        let arr = UlaArray::new(16).unwrap();
        let grid = AngleGrid::synthesis(181).unwrap();
        let a = array_factor_matrix(&arr, &grid);
        let f0 = design_flat_top(&arr, &grid, 0.0, 15f64.to_radians(), 5f64.to_radians(), -25.0, &FistaParams::default())
            .unwrap()
            .beam;
        let cb = build_codebook(&arr, &a, (-45f64.to_radians(), 45f64.to_radians()), 15f64.to_radians(), 5f64.to_radians(), &f0).unwrap();
        (arr, a, cb)
    }

    #[test]
    fn counts_centres_and_power() {
        let (arr, a, cb) = atom_codebook();
        assert_eq!(cb.len(), 18);
        assert_eq!((cb.n_coarse, cb.n_fine), (6, 3));
        assert!((cb.atoms[0].center + 45f64.to_radians()).abs() < 1e-12);
        for atom in &cb.atoms {
            assert!((a.ad_mul(&atom.beam.weights).norm_squared() - 1.0).abs() < 1e-10);
            // half-power span is centred on the atom direction in sine space
            let grid = AngleGrid::uniform_deg(-90.0, 90.0, 0.05).unwrap();
            let p = atom.beam.pattern_at(&arr, &grid.angles);
            let peak = p.iter().cloned().fold(0.0, f64::max);
            let inside: Vec<f64> = grid.angles.iter().zip(&p).filter(|(_, v)| **v >= peak / 2f64.sqrt()).map(|(t, _)| t.sin()).collect();
            let mid = (inside.first().unwrap() + inside.last().unwrap()) / 2.0;
            assert!((mid.asin() - atom.center).abs() < std::f64::consts::PI / 181.0);
        }
    }

    #[test]
    fn partition_must_be_integral() {
        let arr = UlaArray::new(4).unwrap();
        let a = array_factor_matrix(&arr, &AngleGrid::synthesis(20).unwrap());
        let f0 = BeamVector::new(nalgebra::DVector::from_element(4, C64::new(1.0, 0.0)));
        assert!(build_codebook(&arr, &a, (-0.7, 0.7), 0.3, 0.1, &f0).is_err());
        assert!(build_codebook(&arr, &a, (-0.6, 0.6), 0.3, 0.07, &f0).is_err());
    }
}
