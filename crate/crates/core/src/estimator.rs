//! Tracking mode: per-user beams, correlation system and separable
//! maximum-likelihood refinement around coarse priors.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::UlaArray;
use crate::beamforming::ReductionSchedule;
use crate::channel::{effective_channel, EffectiveChannel};
use crate::detector::{glrt_statistic, Point, SearchGrid, SensingContext};
use crate::error::{config_err, RadarError, Result};
use crate::otfs::{Crosstalk, CrosstalkOperator, OtfsConfig};
use crate::C64;

/// Default amplitude bound on `|a^H(phi_p) f_q| / |a^H(phi_p) f_p|`.
pub const DEFAULT_ISOLATION: f64 = 0.05;

/// A user with a dedicated transmit beam and its own symbol stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedUser {
    pub prior: Point,
    pub beam: DVector<C64>,
    /// Per block, the user's `NM` symbols.
    pub symbols: Vec<Vec<C64>>,
}

/// Hann-tapered beam steered at `phi`, unit Euclidean norm.
pub fn user_beam(arr: &UlaArray, phi: f64) -> Result<DVector<C64>> {
    let a = arr.steering_vector(phi)?;
    let n = arr.n_antennas;
    let w = |i: usize| {
        if n == 1 {
            1.0
        } else {
            0.5 - 0.5 * (2.0 * std::f64::consts::PI * (i as f64 + 1.0) / (n as f64 + 1.0)).cos()
        }
    };
    let f = DVector::from_fn(n, |i, _| a[i] * w(i));
    let norm = f.norm();
    Ok(f / C64::new(norm, 0.0))
}

/// Largest leakage ratio `|a^H(phi_p) f_q| / |a^H(phi_p) f_p|` over `p != q`.
pub fn worst_isolation(arr: &UlaArray, users: &[TrackedUser]) -> Result<(f64, usize, usize)> {
    let mut worst = (0.0, 0, 0);
    for (p, up) in users.iter().enumerate() {
        let a = arr.steering_vector(up.prior.phi)?;
        let own = a.dotc(&up.beam).norm();
        for (q, uq) in users.iter().enumerate() {
            if p == q {
                continue;
            }
            let ratio = if own > 0.0 { a.dotc(&uq.beam).norm() / own } else { f64::INFINITY };
            if ratio > worst.0 {
                worst = (ratio, p, q);
            }
        }
    }
    Ok(worst)
}

pub fn check_isolation(arr: &UlaArray, users: &[TrackedUser], tol: f64) -> Result<()> {
    let (ratio, p, q) = worst_isolation(arr, users)?;
    if ratio > tol {
        return config_err(format!(
            "beam of user {q} leaks {ratio:.3} (amplitude ratio) towards user {p}, above the isolation bound {tol}"
        ));
    }
    Ok(())
}

fn column(f: &DVector<C64>) -> DMatrix<C64> {
    DMatrix::from_column_slice(f.len(), 1, f.as_slice())
}

/// `(U_b^H a(phi) a^H(phi) f_p) (x) Psi`: the part of the channel driven by user `p`'s beam.
pub fn slice_channel<'a, X: Crosstalk + ?Sized>(
    arr: &UlaArray,
    u: &DMatrix<C64>,
    f_p: &DVector<C64>,
    psi: &'a X,
    nm: usize,
    phi: f64,
) -> Result<EffectiveChannel<'a, X>> {
    effective_channel(arr, u, &column(f_p), psi, nm, phi)
}

/// Correlations `r_p = sum_b (G_{b,p} x_{b,p})^H y_b` and the `P x P` matrix
/// `A_{p,q} = sum_b (G_{b,p} x_{b,p})^H (G_{b,q} x_{b,q})`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSystem {
    pub r: DVector<C64>,
    pub a: DMatrix<C64>,
}

impl CorrelationSystem {
    /// Largest `|A_pq| / sqrt(A_pp A_qq)` with the pair attaining it.
    pub fn max_coherence(&self) -> (f64, usize, usize) {
        let mut worst = (0.0, 0, 0);
        let n = self.a.nrows();
        for p in 0..n {
            for q in p + 1..n {
                let c = self.a[(p, q)].norm() / (self.a[(p, p)].re * self.a[(q, q)].re).sqrt();
                if c > worst.0 {
                    worst = (c, p, q);
                }
            }
        }
        worst
    }
}

fn check_shapes(cfg: &OtfsConfig, schedule: &ReductionSchedule, y: &[Vec<C64>], users: &[TrackedUser]) -> Result<()> {
    let nm = cfg.nm();
    if y.len() != schedule.blocks() {
        return config_err(format!("{} received blocks for a {}-block schedule", y.len(), schedule.blocks()));
    }
    for (b, (yb, u)) in y.iter().zip(&schedule.matrices).enumerate() {
        if yb.len() != u.ncols() * nm {
            return config_err(format!("received block {b} has length {}, expected {}", yb.len(), u.ncols() * nm));
        }
    }
    for (p, user) in users.iter().enumerate() {
        if user.symbols.len() != schedule.blocks() || user.symbols.iter().any(|s| s.len() != nm) {
            return config_err(format!("user {p} symbols do not cover every block with {nm} entries"));
        }
    }
    Ok(())
}

pub fn correlations(
    cfg: &OtfsConfig,
    arr: &UlaArray,
    schedule: &ReductionSchedule,
    y: &[Vec<C64>],
    users: &[TrackedUser],
    points: &[Point],
) -> Result<CorrelationSystem> {
    check_shapes(cfg, schedule, y, users)?;
    if points.len() != users.len() {
        return config_err(format!("{} hypotheses for {} users", points.len(), users.len()));
    }
    let nm = cfg.nm();
    let ops = points
        .iter()
        .map(|p| CrosstalkOperator::rectangular_checked(cfg, p.nu, p.tau))
        .collect::<Result<Vec<_>>>()?;
    let np = users.len();
    // per block, in order, so the reduction is deterministic
    let per_block = (0..schedule.blocks())
        .into_par_iter()
        .map(|b| {
            let u = &schedule.matrices[b];
            let s = users
                .iter()
                .zip(points)
                .zip(&ops)
                .map(|((user, pt), op)| Ok(slice_channel(arr, u, &user.beam, op, nm, pt.phi)?.apply(&user.symbols[b])))
                .collect::<Result<Vec<Vec<C64>>>>()?;
            let dot = |a: &[C64], c: &[C64]| a.iter().zip(c).map(|(p, q)| p.conj() * q).sum::<C64>();
            let r = DVector::from_fn(np, |p, _| dot(&s[p], &y[b]));
            let a = DMatrix::from_fn(np, np, |p, q| dot(&s[p], &s[q]));
            Ok((r, a))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut r = DVector::zeros(np);
    let mut a = DMatrix::zeros(np, np);
    for (rb, ab) in per_block {
        r += rb;
        a += ab;
    }
    Ok(CorrelationSystem { r, a })
}

/// `h = A^{-1} r`.
pub fn joint_gain_estimate(cs: &CorrelationSystem) -> Result<DVector<C64>> {
    let (coh, p, q) = cs.max_coherence();
    let singular = || {
        RadarError::Singular(format!("correlation matrix is singular: users {p} and {q} are nearly collinear (coherence {coh:.6})"))
    };
    if cs.a.nrows() > 1 && coh > 1.0 - 1e-9 {
        return Err(singular());
    }
    if (0..cs.a.nrows()).any(|i| !(cs.a[(i, i)].re > 0.0)) {
        return Err(RadarError::Singular("a user has no signal energy under its hypothesis".into()));
    }
    cs.a.clone().cholesky().map(|c| c.solve(&cs.r)).ok_or_else(singular)
}

/// `h_p = r_p / A_pp`, neglecting the cross-correlations.
pub fn diagonal_gain_estimate(cs: &CorrelationSystem) -> DVector<C64> {
    DVector::from_fn(cs.r.len(), |p, _| cs.r[p] / cs.a[(p, p)].re)
}

/// Concentrated log-likelihood `2 Re(h^H r) - h^H A h` (up to constants).
pub fn gain_log_likelihood(cs: &CorrelationSystem, h: &DVector<C64>) -> f64 {
    2.0 * h.dotc(&cs.r).re - h.dotc(&(&cs.a * h)).re
}

/// Owned per-user sensing context (beam as a one-column transmit matrix).
struct UserView {
    tx: DMatrix<C64>,
}

fn user_ctx<'a>(
    cfg: &'a OtfsConfig,
    arr: &'a UlaArray,
    schedule: &'a ReductionSchedule,
    view: &'a UserView,
    user: &'a TrackedUser,
) -> SensingContext<'a> {
    SensingContext { cfg, array: arr, tx: &view.tx, schedule, x: &user.symbols }
}

/// `|sum_b y_b^H G_{b,p} x_{b,p}|^2 / sum_b ||G_{b,p} x_{b,p}||^2`; `None` when annihilated.
pub fn separable_likelihood(
    cfg: &OtfsConfig,
    arr: &UlaArray,
    schedule: &ReductionSchedule,
    y: &[Vec<C64>],
    user: &TrackedUser,
    point: Point,
) -> Result<Option<f64>> {
    let view = UserView { tx: column(&user.beam) };
    glrt_statistic(&user_ctx(cfg, arr, schedule, &view, user), y, point)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Coarse cell size in (Doppler Hz, delay s, angle rad); the search spans one cell either side.
    pub steps: [f64; 3],
    pub refine_factor: usize,
    pub zoom_stages: usize,
    /// Solve the full `A h = r` system instead of the diagonal approximation.
    pub full_a: bool,
}

impl EstimatorConfig {
    pub fn for_grid(grid: &SearchGrid) -> Self {
        Self { steps: grid.steps(), refine_factor: 10, zoom_stages: 0, full_a: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserEstimate {
    pub user: usize,
    pub point: Point,
    pub gain: C64,
    pub statistic: f64,
}

/// Per-user local search of the separable likelihood around the prior, then
/// gains from the correlation system at the estimated points.
pub fn estimate_all(
    cfg: &OtfsConfig,
    arr: &UlaArray,
    schedule: &ReductionSchedule,
    y: &[Vec<C64>],
    users: &[TrackedUser],
    ecfg: &EstimatorConfig,
) -> Result<Vec<UserEstimate>> {
    check_shapes(cfg, schedule, y, users)?;
    if ecfg.refine_factor == 0 {
        return config_err("refine factor must be at least 1");
    }
    let found = users
        .par_iter()
        .enumerate()
        .map(|(p, user)| {
            let view = UserView { tx: column(&user.beam) };
            let ctx = user_ctx(cfg, arr, schedule, &view, user);
            crate::detector::local_search(&ctx, y, user.prior, ecfg.steps, ecfg.refine_factor, ecfg.zoom_stages)
                .ok_or_else(|| RadarError::Domain(format!("no searchable hypothesis around the prior of user {p}")))
        })
        .collect::<Result<Vec<(Point, f64)>>>()?;
    let points: Vec<Point> = found.iter().map(|f| f.0).collect();
    let cs = correlations(cfg, arr, schedule, y, users, &points)?;
    let gains = if ecfg.full_a { joint_gain_estimate(&cs)? } else { diagonal_gain_estimate(&cs) };
    Ok(found
        .into_iter()
        .enumerate()
        .map(|(p, (point, statistic))| UserEstimate { user: p, point, gain: gains[p], statistic })
        .collect())
}
