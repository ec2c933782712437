use nalgebra::{DMatrix, DVector};

use crate::array::UlaArray;
use crate::error::{config_err, domain_err, Result};
use crate::C64;

use super::{array_factor_matrix, normalize_power, AngleGrid, BeamMask, BeamVector, Region};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FistaParams {
    /// Weight of the fit term against the l1 penalty.
    pub gamma: f64,
    /// Main-lobe dead zone, relative to the main level.
    pub epsilon: f64,
    pub k_p: f64,
    pub k_m: f64,
    pub max_iter: usize,
    /// Relative objective change regarded as converged.
    pub tol: f64,
    /// Multiplier (>= 1) on the Lipschitz constant, i.e. a shorter step.
    pub step_factor: f64,
    /// Keep the previous iterate when the proximal step would raise the objective.
    pub monotone: bool,
}

impl Default for FistaParams {
    fn default() -> Self {
        Self { gamma: 1e4, epsilon: 0.02, k_p: 1.0, k_m: 5.0, max_iter: 1500, tol: 1e-8, step_factor: 1.0, monotone: true }
    }
}

#[derive(Debug, Clone)]
pub struct FistaOutcome {
    /// Final iterate before power normalisation.
    pub raw: DVector<C64>,
    pub beam: BeamVector,
    pub converged: bool,
    pub iterations: usize,
    /// Objective before and after each step, both under that step's weights.
    pub checkpoints: Vec<(f64, f64)>,
    /// Momentum sequence `t^(i)`.
    pub momentum: Vec<f64>,
    /// Final per-angle fit weights.
    pub weights: Vec<f64>,
}

/// Complex soft threshold: shrinks each modulus by `alpha`, keeps the phase.
pub fn shrink(w: &DVector<C64>, alpha: f64) -> DVector<C64> {
    w.map(|v| {
        let m = v.norm();
        if m > alpha {
            v * ((m - alpha) / m)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

struct Problem<'a> {
    a: &'a DMatrix<C64>,
    b: &'a DVector<C64>,
    gamma: f64,
}

impl Problem<'_> {
    fn residual(&self, w: &DVector<C64>) -> DVector<C64> {
        self.a.ad_mul(w) - self.b
    }

    fn objective(&self, w: &DVector<C64>, d: &[f64]) -> f64 {
        let r = self.residual(w);
        let fit: f64 = r.iter().zip(d).map(|(v, di)| di * v.norm_sqr()).sum();
        w.iter().map(|v| v.norm()).sum::<f64>() / (2.0 * self.gamma) + 0.5 * fit
    }

    fn gradient(&self, w: &DVector<C64>, d: &[f64]) -> DVector<C64> {
        let mut r = self.residual(w);
        for (v, di) in r.iter_mut().zip(d) {
            *v *= *di;
        }
        self.a * r
    }

    fn lipschitz(&self, d: &[f64]) -> f64 {
        let mut ad = self.a.clone();
        for (j, di) in d.iter().enumerate() {
            ad.column_mut(j).scale_mut(*di);
        }
        let h = ad * self.a.adjoint();
        h.symmetric_eigenvalues().iter().cloned().fold(0.0, f64::max)
    }
}

/// Weighted-LS flat-top synthesis by FISTA with per-iteration reweighting.
///
/// Minimises `||w||_1 / (2 gamma) + 1/2 sum_g d_g |a(theta_g)^H w - b_g|^2`
/// where `b_g` is the mask magnitude with a linear phase centred on the array
/// middle. The weights `d_g` grow wherever the pattern leaves the mask.
pub fn synth_fista(mask: &BeamMask, arr: &UlaArray, grid: &AngleGrid, params: &FistaParams) -> Result<FistaOutcome> {
    if !(params.gamma > 0.0) {
        return domain_err(format!("gamma must be positive, got {}", params.gamma));
    }
    if !(params.step_factor >= 1.0) {
        return domain_err("step factor below 1 exceeds the Lipschitz step");
    }
    if mask.len() != grid.len() {
        return config_err(format!("mask has {} points, grid has {}", mask.len(), grid.len()));
    }
    let a = array_factor_matrix(arr, grid);
    let half = (arr.n_antennas as f64 - 1.0) / 2.0;
    let b = DVector::from_iterator(
        grid.len(),
        grid.angles
            .iter()
            .zip(&mask.desired)
            .map(|(th, m)| C64::from_polar(*m, -half * std::f64::consts::PI * th.sin())),
    );
    let prob = Problem { a: &a, b: &b, gamma: params.gamma };
    let sigma_m = mask.main_level;

    let mut d: Vec<f64> = mask.regions.iter().map(|r| if *r == Region::Transition { 0.0 } else { 1.0 }).collect();
    let zero = DVector::from_element(arr.n_antennas, C64::new(0.0, 0.0));
    let (mut w, mut y) = (zero.clone(), zero);
    let mut t: f64 = 1.0;
    let mut checkpoints = Vec::new();
    let mut momentum = vec![t];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..params.max_iter {
        iterations += 1;
        let lip = prob.lipschitz(&d) * params.step_factor;
        let z = shrink(&(&y - prob.gradient(&y, &d) / C64::new(lip, 0.0)), 1.0 / (2.0 * params.gamma * lip));
        let f_old = prob.objective(&w, &d);
        let f_z = prob.objective(&z, &d);
        let accepted = !(params.monotone && f_z > f_old);
        let (w_new, f_new) = if accepted { (z.clone(), f_z) } else { (w.clone(), f_old) };
        let t_new = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = &w_new + (&z - &w_new) * C64::new(t / t_new, 0.0) + (&w_new - &w) * C64::new((t - 1.0) / t_new, 0.0);
        checkpoints.push((f_old, f_new));
        w = w_new;
        t = t_new;
        momentum.push(t);

        // reweighting, never decreasing
        let p = a.ad_mul(&w);
        let mut changed = false;
        for (g, region) in mask.regions.iter().enumerate() {
            let s = match region {
                Region::Main => {
                    let r = (p[g] - b[g]).norm();
                    if r < params.epsilon * sigma_m {
                        0.0
                    } else {
                        params.k_m * r / sigma_m
                    }
                }
                Region::Peripheral => (params.k_p * (p[g].norm() - mask.desired[g]) / sigma_m).max(0.0),
                Region::Transition => 0.0,
            };
            if s > 0.0 {
                d[g] += s;
                changed = true;
            }
        }
        if accepted && !changed && (f_old - f_new).abs() <= params.tol * f_old.max(f64::MIN_POSITIVE) && iterations > 1 {
            converged = true;
            break;
        }
    }
    let beam = if w.iter().all(|v| v.norm() == 0.0) { BeamVector::new(w.clone()) } else { normalize_power(&BeamVector::new(w.clone()), &a)? };
    Ok(FistaOutcome { raw: w, beam, converged, iterations, checkpoints, momentum, weights: d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::{pattern_of, BeamQuality};
    use proptest::prelude::*;

    #[test]
    fn shrink_properties() {
        let w = DVector::from_vec(vec![C64::new(3.0, 4.0), C64::new(0.1, 0.0), C64::new(0.0, -2.0)]);
        let s = shrink(&w, 1.0);
        assert!((s[0] - C64::new(2.4, 3.2)).norm() < 1e-12);
        assert_eq!(s[1], C64::new(0.0, 0.0));
        assert!((s[2] - C64::new(0.0, -1.0)).norm() < 1e-12);
        assert_eq!(shrink(&w, 0.0), w);
    }

    proptest! {
        #[test]
        fn shrink_modulus_and_phase(re in -5.0f64..5.0, im in -5.0f64..5.0, alpha in 0.0f64..3.0) {
            let v = C64::new(re, im);
            let s = shrink(&DVector::from_vec(vec![v]), alpha)[0];
            prop_assert!((s.norm() - (v.norm() - alpha).max(0.0)).abs() < 1e-12);
            if s.norm() > 1e-12 {
                prop_assert!((s / s.norm() - v / v.norm()).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn wide_beam_meets_design_targets() {
        let arr = UlaArray::new(16).unwrap();
        let grid = AngleGrid::synthesis(181).unwrap();
        let (hw, tr) = (45f64.to_radians(), 15f64.to_radians());
        let mask = BeamMask::flat_top(&grid, 0.0, hw, tr, -25.0).unwrap();
        let out = synth_fista(&mask, &arr, &grid, &FistaParams::default()).unwrap();
        let q = BeamQuality::measure(&out.beam, &arr, 0.0, hw, tr);
        assert!(q.ripple_db <= 1.0, "{q:?}");
        assert!(q.sll_db <= -15.0, "{q:?}");
        let p = pattern_of(&out.beam, &array_factor_matrix(&arr, &grid));
        assert!((p.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-10);
        for (i, (before, after)) in out.checkpoints.iter().enumerate() {
            assert!(after <= &(before + 1e-9 * before.abs().max(1.0)), "step {i}: {before} -> {after}");
        }
        for (i, t) in out.momentum.iter().enumerate() {
            assert!(*t >= (i as f64 + 1.0) / 2.0);
        }
        assert!(out.momentum.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn planted_pattern_is_matched() {
        // triangular taper: its pattern is a squared Dirichlet kernel, so
        // magnitude and the centred linear phase are both reproducible
        let arr = UlaArray::new(9).unwrap();
        let grid = AngleGrid::synthesis(90).unwrap();
        let w0 = DVector::from_fn(9, |n, _| C64::new(5.0 - (n as f64 - 4.0).abs(), 0.0));
        let a = array_factor_matrix(&arr, &grid);
        let mask = BeamMask::from_pattern(a.ad_mul(&w0).iter().map(|v| v.norm()).collect()).unwrap();
        let params = FistaParams { gamma: 1e7, max_iter: 3000, ..FistaParams::default() };
        let out = synth_fista(&mask, &arr, &grid, &params).unwrap();
        let half = 4.0;
        let b = DVector::from_iterator(
            90,
            grid.angles.iter().zip(&mask.desired).map(|(th, m)| C64::from_polar(*m, -half * std::f64::consts::PI * th.sin())),
        );
        let res = (a.ad_mul(&out.raw) - &b).norm();
        let res0 = (a.ad_mul(&w0) - &b).norm();
        assert!(res0 < 1e-9);
        assert!(res <= res0 * (1.0 + 1e-3) + 1e-3 * b.norm(), "residual {res} vs planted {res0}");
    }

    #[test]
    fn tiny_gamma_shrinks_to_zero() {
        let arr = UlaArray::new(8).unwrap();
        let grid = AngleGrid::synthesis(64).unwrap();
        let mask = BeamMask::flat_top(&grid, 0.0, 0.5, 0.1, -20.0).unwrap();
        let params = FistaParams { gamma: 1e-6, max_iter: 50, ..FistaParams::default() };
        let out = synth_fista(&mask, &arr, &grid, &params).unwrap();
        assert!(out.raw.norm() < 1e-12);
        assert!(synth_fista(&mask, &arr, &grid, &FistaParams { gamma: 0.0, ..params }).is_err());
    }

    #[test]
    fn weights_never_decrease() {
        let arr = UlaArray::new(8).unwrap();
        let grid = AngleGrid::synthesis(64).unwrap();
        let mask = BeamMask::flat_top(&grid, 0.0, 0.4, 0.2, -20.0).unwrap();
        let mut prev: Option<Vec<f64>> = None;
        for iters in [1, 5, 20, 60] {
            let out = synth_fista(&mask, &arr, &grid, &FistaParams { max_iter: iters, ..FistaParams::default() }).unwrap();
            if let Some(p) = &prev {
                assert!(p.iter().zip(&out.weights).all(|(a, b)| b >= a));
            }
            prev = Some(out.weights);
        }
    }
}
