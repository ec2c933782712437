use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::Result;
use crate::otfs::{Crosstalk, CrosstalkCache, CrosstalkOperator};
use crate::C64;

use super::{Point, SearchGrid, SensingContext};

/// `Psi x_{b,q}` for one `(nu, tau)` and the Gram matrix of the streams per block.
#[derive(Debug, Clone)]
pub(crate) struct Projection {
    /// `[b][q]` -> length `NM`
    z: Vec<Vec<Vec<C64>>>,
    /// `[b]` -> `N_s x N_s`, entry `(q, q') = <z_q, z_q'>`
    gram: Vec<DMatrix<C64>>,
    scale: f64,
}

impl Projection {
    pub(crate) fn new<X: Crosstalk + ?Sized>(ctx: &SensingContext, psi: &X) -> Self {
        let nm = ctx.cfg.nm();
        let ns = ctx.n_streams();
        let z: Vec<Vec<Vec<C64>>> = ctx.x.iter().map(|xb| xb.chunks_exact(nm).map(|xq| psi.apply_vec(xq)).collect()).collect();
        let gram: Vec<DMatrix<C64>> = z
            .iter()
            .map(|zb| DMatrix::from_fn(ns, ns, |q, p| zb[q].iter().zip(&zb[p]).map(|(a, b)| a.conj() * b).sum()))
            .collect();
        // upper bound of the denominator over all angles, used to spot annihilated cells
        let tx_energy = ctx.tx.norm_squared();
        let na2 = (ctx.array.n_antennas as f64).powi(2);
        let scale = gram
            .iter()
            .zip(&ctx.schedule.matrices)
            .map(|(g, u)| g.trace().re * u.norm_squared() * tx_energy * na2)
            .sum();
        Self { z, gram, scale }
    }

    /// `c[b](r, q) = y_b[r]^H z_{b,q}`.
    pub(crate) fn correlate(&self, y: &[Vec<C64>], nm: usize) -> Vec<DMatrix<C64>> {
        y.iter()
            .zip(&self.z)
            .map(|(yb, zb)| {
                let n_rf = yb.len() / nm;
                DMatrix::from_fn(n_rf, zb.len(), |r, q| {
                    yb[r * nm..(r + 1) * nm].iter().zip(&zb[q]).map(|(a, b)| a.conj() * b).sum()
                })
            })
            .collect()
    }

    /// `(sum_b y_b^H G_b x_b, sum_b ||G_b x_b||^2)`; `None` when the beams annihilate the hypothesis.
    pub(crate) fn evaluate(&self, c: &[DMatrix<C64>], factors: &[DMatrix<C64>]) -> Option<(C64, f64)> {
        let mut num = C64::new(0.0, 0.0);
        let mut den = 0.0;
        for ((cb, gb), fac) in c.iter().zip(&self.gram).zip(factors) {
            num += fac.iter().zip(cb.iter()).map(|(f, v)| f * v).sum::<C64>();
            for r in 0..fac.nrows() {
                let row = fac.row(r);
                let mut acc = C64::new(0.0, 0.0);
                for q in 0..row.len() {
                    for p in 0..row.len() {
                        acc += row[q].conj() * row[p] * gb[(q, p)];
                    }
                }
                den += acc.re;
            }
        }
        (den.is_finite() && den > 1e-20 * self.scale).then_some((num, den))
    }
}

fn eval_point<X: Crosstalk + ?Sized>(ctx: &SensingContext, y: &[Vec<C64>], psi: &X, phi: f64) -> Option<(C64, f64)> {
    let proj = Projection::new(ctx, psi);
    let c = proj.correlate(y, ctx.cfg.nm());
    proj.evaluate(&c, &ctx.spatial_factors(phi))
}

/// `|sum_b y_b^H G_b x_b|^2 / sum_b ||G_b x_b||^2`; `None` for an unsearchable point.
pub fn glrt_statistic(ctx: &SensingContext, y: &[Vec<C64>], point: Point) -> Result<Option<f64>> {
    ctx.check(y)?;
    let op = CrosstalkOperator::rectangular_checked(ctx.cfg, point.nu, point.tau)?;
    Ok(eval_point(ctx, y, &op, point.phi).map(|(n, d)| n.norm_sqr() / d))
}

/// Least-squares gain `(sum_b y_b^H G_b x_b)^* / sum_b ||G_b x_b||^2`.
pub fn estimate_gain(ctx: &SensingContext, y: &[Vec<C64>], point: Point) -> Result<Option<C64>> {
    ctx.check(y)?;
    let op = CrosstalkOperator::rectangular_checked(ctx.cfg, point.nu, point.tau)?;
    Ok(eval_point(ctx, y, &op, point.phi).map(|(n, d)| n.conj() / d))
}

/// Crosstalk projections of the transmitted symbols on every coarse `(nu, tau)`
/// and spatial factors on every coarse angle. Independent of the received data,
/// so one instance serves all cancellation passes of a trial.
#[derive(Debug, Clone)]
pub struct CoarseProjections {
    pub(crate) grid: SearchGrid,
    proj: Vec<Projection>,
    /// `[i_phi][b]`
    factors: Vec<Vec<DMatrix<C64>>>,
}

impl CoarseProjections {
    pub fn new(ctx: &SensingContext, grid: &SearchGrid, cache: &CrosstalkCache) -> Result<Self> {
        let pairs: Vec<(f64, f64)> = grid.doppler.iter().flat_map(|&nu| grid.delay.iter().map(move |&tau| (nu, tau))).collect();
        let proj = pairs
            .par_iter()
            .map(|&(nu, tau)| Ok(Projection::new(ctx, cache.get(nu, tau)?.as_ref())))
            .collect::<Result<Vec<_>>>()?;
        let factors = grid.angle.iter().map(|&phi| ctx.spatial_factors(phi)).collect();
        Ok(Self { grid: grid.clone(), proj, factors })
    }
}

/// GLRT statistic on every coarse cell, with a validity flag per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodMap {
    pub grid: SearchGrid,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    pub denominators: Vec<f64>,
}

impl LikelihoodMap {
    pub fn from_projections(ctx: &SensingContext, y: &[Vec<C64>], cp: &CoarseProjections) -> Result<Self> {
        ctx.check(y)?;
        let nm = ctx.cfg.nm();
        let rows: Vec<Vec<Option<(C64, f64)>>> = cp
            .proj
            .par_iter()
            .map(|p| {
                let c = p.correlate(y, nm);
                cp.factors.iter().map(|f| p.evaluate(&c, f)).collect()
            })
            .collect();
        let n = cp.grid.len();
        let (mut values, mut valid, mut denominators) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for cell in rows.into_iter().flatten() {
            match cell {
                Some((num, den)) => {
                    values.push(num.norm_sqr() / den);
                    valid.push(true);
                    denominators.push(den);
                }
                None => {
                    values.push(0.0);
                    valid.push(false);
                    denominators.push(0.0);
                }
            }
        }
        Ok(Self { grid: cp.grid.clone(), values, valid, denominators })
    }

    /// Highest valid cell among `cells`; ties go to the lowest flat index.
    pub fn argmax_of(&self, cells: &[usize]) -> Option<usize> {
        let mut best: Option<usize> = None;
        for &c in cells {
            if !self.valid[c] {
                continue;
            }
            match best {
                Some(b) if self.values[c] < self.values[b] || (self.values[c] == self.values[b] && c > b) => {}
                _ => best = Some(c),
            }
        }
        best
    }

    pub fn argmax(&self) -> Option<usize> {
        self.argmax_of(&(0..self.values.len()).collect::<Vec<_>>())
    }
}

/// Builds the map from scratch (projections included).
pub fn build_likelihood_map(
    ctx: &SensingContext,
    y: &[Vec<C64>],
    grid: &SearchGrid,
    cache: &CrosstalkCache,
) -> Result<LikelihoodMap> {
    LikelihoodMap::from_projections(ctx, y, &CoarseProjections::new(ctx, grid, cache)?)
}
