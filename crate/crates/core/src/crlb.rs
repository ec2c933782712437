//! Single-target Fisher information over `(A, psi, phi, tau, nu)` and the
//! resulting Cramér-Rao bounds, using the approximated crosstalk model.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix5};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::array::UlaArray;
use crate::beamforming::{ReductionSchedule, ScheduleStrategy};
use crate::error::{config_err, domain_err, RadarError, Result};
use crate::otfs::{generate_symbols, ApproxCrosstalk, Constellation, OtfsConfig, Part};
use crate::C64;

/// Parameter order used by every matrix and bound in this module.
pub const PARAM_NAMES: [&str; 5] = ["A", "psi", "phi", "tau", "nu"];
pub const IDX_A: usize = 0;
pub const IDX_PSI: usize = 1;
pub const IDX_PHI: usize = 2;
pub const IDX_TAU: usize = 3;
pub const IDX_NU: usize = 4;

/// Real parametrisation of one path: `h = A e^{j psi}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamVector {
    pub amplitude: f64,
    pub phase: f64,
    pub phi: f64,
    pub tau: f64,
    pub nu: f64,
}

impl ParamVector {
    pub fn as_array(&self) -> [f64; 5] {
        [self.amplitude, self.phase, self.phi, self.tau, self.nu]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self { amplitude: v[0], phase: v[1], phi: v[2], tau: v[3], nu: v[4] }
    }

    fn gain(&self) -> C64 {
        C64::from_polar(self.amplitude, self.phase)
    }
}

/// Everything except the path parameters: frame, array, receive schedule,
/// the single transmit beam, per-symbol power and noise variance.
#[derive(Debug, Clone, Copy)]
pub struct FisherSetup<'a> {
    pub cfg: &'a OtfsConfig,
    pub array: &'a UlaArray,
    pub schedule: &'a ReductionSchedule,
    pub beam: &'a DVector<C64>,
    pub power: f64,
    pub noise_variance: f64,
}

impl FisherSetup<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return domain_err(format!("noise variance must be positive, got {}", self.noise_variance));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return domain_err(format!("symbol power must be positive, got {}", self.power));
        }
        if self.beam.len() != self.array.n_antennas {
            return config_err(format!("beam has {} weights for {} antennas", self.beam.len(), self.array.n_antennas));
        }
        if let Some(b) = self.schedule.matrices.iter().position(|u| u.nrows() != self.array.n_antennas) {
            return config_err(format!("reduction matrix {b} does not match the array"));
        }
        Ok(())
    }

    /// `U_b^H a a^H f` and its angle derivative `U_b^H (a' a^H + a a'^H) f`.
    fn spatial(&self, b: usize, phi: f64) -> Result<(DVector<C64>, DVector<C64>)> {
        let a = self.array.steering_vector(phi)?;
        let da = self.array.steering_derivative(phi)?;
        let u = &self.schedule.matrices[b];
        let af = a.dotc(self.beam);
        let daf = da.dotc(self.beam);
        let v = u.adjoint() * &a * af;
        let dv = u.adjoint() * (&da * af + &a * daf);
        Ok((v, dv))
    }
}

fn kron_apply(v: &DVector<C64>, z: &[C64], scale: C64) -> Vec<C64> {
    v.iter().flat_map(|&vr| z.iter().map(move |&zi| scale * vr * zi)).collect()
}

/// Noiseless approximated signal of block `b`, stacked `r * NM + i`.
pub fn signal_mean(setup: &FisherSetup, theta: &ParamVector, b: usize, x: &[C64]) -> Result<Vec<C64>> {
    setup.validate()?;
    let psi = ApproxCrosstalk::new(setup.cfg, theta.nu, theta.tau)?;
    let (v, _) = setup.spatial(b, theta.phi)?;
    Ok(kron_apply(&v, &psi.apply_vec(Part::Value, x), theta.gain()))
}

/// Partial derivatives of [`signal_mean`] in the order `(A, psi, phi, tau, nu)`.
pub fn signal_derivatives(setup: &FisherSetup, theta: &ParamVector, b: usize, x: &[C64]) -> Result<[Vec<C64>; 5]> {
    setup.validate()?;
    let psi = ApproxCrosstalk::new(setup.cfg, theta.nu, theta.tau)?;
    let (v, dv) = setup.spatial(b, theta.phi)?;
    let h = theta.gain();
    let z = psi.apply_vec(Part::Value, x);
    Ok([
        kron_apply(&v, &z, C64::from_polar(1.0, theta.phase)),
        kron_apply(&v, &z, C64::i() * h),
        kron_apply(&dv, &z, h),
        kron_apply(&v, &psi.apply_vec(Part::DTau, x), h),
        kron_apply(&v, &psi.apply_vec(Part::DNu, x), h),
    ])
}

/// Symmetric `5 x 5` Fisher information in the order of [`PARAM_NAMES`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherMatrix {
    pub matrix: Matrix5<f64>,
}

impl FisherMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// `|I_ij| / sqrt(I_ii I_jj)`-normalised distance to `other`, maximised over entries.
    pub fn max_normalized_gap(&self, other: &FisherMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                let s = (self.get(i, i) * self.get(j, j)).sqrt();
                worst = worst.max((self.get(i, j) - other.get(i, j)).abs() / s);
            }
        }
        worst
    }
}

impl std::ops::Add for FisherMatrix {
    type Output = FisherMatrix;
    fn add(self, rhs: Self) -> Self {
        FisherMatrix { matrix: self.matrix + rhs.matrix }
    }
}

/// Which expectation over the symbols to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FisherPath {
    /// Per-element expressions after taking the i.i.d. symbol expectation analytically.
    ClosedForm,
    /// Average of `Re(ds_i^H ds_j)` over explicit QPSK draws.
    MonteCarlo { trials: usize, seed: u64 },
}

pub fn fisher_matrix(setup: &FisherSetup, theta: &ParamVector, path: FisherPath) -> Result<FisherMatrix> {
    match path {
        FisherPath::ClosedForm => fisher_closed_form(setup, theta),
        FisherPath::MonteCarlo { trials, seed } => fisher_monte_carlo(setup, theta, trials, seed),
    }
}

/// `I_ij = (2 P / sigma^2) sum_b Re[ c_i^* c_j (v_i^H v_j) tr(Q_i^H Q_j) ]`, where
/// each derivative is `c_i v_i (x) Q_i x`: `Q` is the approximated crosstalk or
/// one of its derivatives and `v_i` is `U^H a a^H f` or its angle derivative
/// `j pi cos(phi) U^H (a a^H . D) f` with `D_{m,m'} = m - m'`.
pub fn fisher_closed_form(setup: &FisherSetup, theta: &ParamVector) -> Result<FisherMatrix> {
    setup.validate()?;
    let psi = ApproxCrosstalk::new(setup.cfg, theta.nu, theta.tau)?;
    let q = [psi.matrix(Part::Value), psi.matrix(Part::DTau), psi.matrix(Part::DNu)];
    let mut tr = [[C64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            tr[i][j] = q[i].iter().zip(q[j].iter()).map(|(a, b)| a.conj() * b).sum();
        }
    }
    let a = setup.array.steering_vector(theta.phi)?;
    let aa = &a * a.adjoint();
    let d = setup.array.difference_matrix();
    let aad = DMatrix::from_fn(aa.nrows(), aa.ncols(), |m, n| aa[(m, n)] * d[(m, n)]);
    let spatial_d = C64::new(0.0, PI * theta.phi.cos());
    let h = theta.gain();
    let coef = [C64::from_polar(1.0, theta.phase), C64::i() * h, h, h, h];
    let q_of = [0, 0, 0, 1, 2];
    let v_of = [0, 0, 1, 0, 0];
    let mut info = Matrix5::zeros();
    for u in &setup.schedule.matrices {
        let v = [u.adjoint() * (&aa * setup.beam), u.adjoint() * (&aad * setup.beam) * spatial_d];
        for i in 0..5 {
            for j in 0..5 {
                let vv = v[v_of[i]].dotc(&v[v_of[j]]);
                info[(i, j)] += (coef[i].conj() * coef[j] * vv * tr[q_of[i]][q_of[j]]).re;
            }
        }
    }
    Ok(FisherMatrix { matrix: info * (2.0 * setup.power / setup.noise_variance) })
}

/// Monte Carlo expectation over `trials` QPSK symbol draws of per-block power `P`.
pub fn fisher_monte_carlo(setup: &FisherSetup, theta: &ParamVector, trials: usize, seed: u64) -> Result<FisherMatrix> {
    setup.validate()?;
    if trials == 0 {
        return config_err("Monte Carlo Fisher matrix needs at least one trial");
    }
    let blocks = setup.schedule.blocks();
    let partial: Vec<Result<Matrix5<f64>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = crate::rng::stream(seed, &[crate::rng::tag::SYMBOLS, t as u64]);
            let mut acc = Matrix5::zeros();
            for b in 0..blocks {
                let x = generate_symbols(setup.cfg, 1, Constellation::Qpsk, setup.power, &mut rng)?;
                let ds = signal_derivatives(setup, theta, b, x[0].as_slice())?;
                for i in 0..5 {
                    for j in i..5 {
                        let v: f64 = ds[i].iter().zip(&ds[j]).map(|(p, q)| (p.conj() * q).re).sum();
                        acc[(i, j)] += v;
                        if i != j {
                            acc[(j, i)] += v;
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut sum = Matrix5::zeros();
    for p in partial {
        sum += p?;
    }
    Ok(FisherMatrix { matrix: sum * (2.0 / (setup.noise_variance * trials as f64)) })
}

/// Largest condition number of the unit-diagonal (correlation) form of the
/// Fisher matrix accepted by [`crlb`].
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

/// Diagonal of the inverse Fisher matrix.
///
/// The inversion runs on the unit-diagonal scaling so that parameters with very
/// different units (seconds, hertz, radians) do not spoil the conditioning.
pub fn crlb(fim: &FisherMatrix, condition_cap: f64) -> Result<[f64; 5]> {
    let m = &fim.matrix;
    if (0..5).any(|i| !(m[(i, i)] > 0.0)) {
        return Err(RadarError::Singular("Fisher matrix has a non-positive diagonal entry".into()));
    }
    let s = Matrix5::from_fn(|i, j| m[(i, j)] / (m[(i, i)] * m[(j, j)]).sqrt());
    let eig = s.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if cond > condition_cap {
        return Err(RadarError::Singular(format!("Fisher matrix condition number {cond:e} exceeds {condition_cap:e}")));
    }
    let inv = s
        .try_inverse()
        .ok_or_else(|| RadarError::Singular(format!("Fisher matrix not invertible (condition {cond:e})")))?;
    Ok(std::array::from_fn(|i| inv[(i, i)] / m[(i, i)]))
}

/// Bounds of one receive schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyBound {
    pub strategy: ScheduleStrategy,
    pub blocks: usize,
    pub n_rf: usize,
    pub crlb: [f64; 5],
}

/// Closed-form bounds for each schedule at the same path and SNR. The
/// fully-digital reference may differ in `(B, N_rf)`; all others must agree.
pub fn compare_strategies(
    setup: &FisherSetup,
    theta: &ParamVector,
    schedules: &[ReductionSchedule],
) -> Result<Vec<StrategyBound>> {
    let reduced: Vec<&ReductionSchedule> =
        schedules.iter().filter(|s| s.strategy != ScheduleStrategy::FullyDigital).collect();
    if let Some(first) = reduced.first() {
        if reduced.iter().any(|s| s.blocks() != first.blocks() || s.n_rf() != first.n_rf()) {
            return config_err("schedules to compare must share the number of blocks and RF chains");
        }
    }
    schedules
        .iter()
        .map(|s| {
            let st = FisherSetup { schedule: s, ..*setup };
            let fim = fisher_closed_form(&st, theta)?;
            Ok(StrategyBound { strategy: s.strategy, blocks: s.blocks(), n_rf: s.n_rf(), crlb: crlb(&fim, DEFAULT_CONDITION_CAP)? })
        })
        .collect()
}

/// Delay and Doppler diagonal elements in a shortcut form that drops the
/// `2 / sigma^2` factor and flips the Doppler sign: `(4 pi^2 A^2 df^2 P / (NM)^2) sum_b ||v_b||^2 sum |1^T alpha c^T beta|^2`
/// and `-(4 pi^2 A^2 P / (NM)^2) sum_b ||v_b||^2 sum |d|^2`. Kept only to
/// quantify their disagreement with the defining inner products.
pub fn shortcut_delay_doppler_diagonal(setup: &FisherSetup, theta: &ParamVector) -> Result<(f64, f64)> {
    setup.validate()?;
    let psi = ApproxCrosstalk::new(setup.cfg, theta.nu, theta.tau)?;
    let nm = setup.cfg.nm() as f64;
    let df = setup.cfg.delta_f();
    // d Psi/d tau = (j 2 pi df / NM) (1^T alpha)(c^T beta) and d Psi/d nu = (j 2 pi / NM) d
    let sum_tau: f64 = psi.matrix(Part::DTau).iter().map(|v| (v * nm / (2.0 * PI * df)).norm_sqr()).sum();
    let sum_d: f64 = psi.matrix(Part::DNu).iter().map(|v| (v * nm / (2.0 * PI)).norm_sqr()).sum();
    let mut v2 = 0.0;
    for b in 0..setup.schedule.blocks() {
        v2 += setup.spatial(b, theta.phi)?.0.norm_squared();
    }
    let a2p = theta.amplitude.powi(2) * setup.power;
    let k = 4.0 * PI * PI * a2p / (nm * nm);
    Ok((k * df * df * v2 * sum_tau, -k * v2 * sum_d))
}

/// Uniform draw helper for parameter sweeps in tests and experiments.
pub fn random_params<R: Rng + ?Sized>(cfg: &OtfsConfig, rng: &mut R) -> ParamVector {
    let u = |rng: &mut R, lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    ParamVector {
        amplitude: u(rng, 0.5, 2.0),
        phase: u(rng, -PI, PI),
        phi: u(rng, -0.7, 0.7),
        // keep clear of delay-bin edges, where the approximation switches branch
        tau: (rng.random_range(0..cfg.m()) as f64 + u(rng, 0.1, 0.9)) * cfg.delay_bin(),
        nu: u(rng, -0.45, 0.45) * cfg.delta_f(),
    }
}
