use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::channel::effective_channel;
use crate::error::Result;
use crate::otfs::CrosstalkOperator;
use crate::C64;

use super::cfar::{above_threshold_set, os_cfar_threshold, CfarConfig};
use super::glrt::{CoarseProjections, LikelihoodMap, Projection};
use super::{Point, SearchGrid, SensingContext};

/// Stopping and refinement settings of the detect-estimate-cancel loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectLimits {
    pub max_detections: usize,
    /// Fine-grid subdivisions per coarse step.
    pub refine_factor: usize,
    /// Extra passes that shrink the search box by `refine_factor` around the current best.
    pub zoom_stages: usize,
}

impl DetectLimits {
    pub fn new(max_detections: usize) -> Self {
        Self { max_detections, refine_factor: 10, zoom_stages: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub order: usize,
    pub coarse_cell: [usize; 3],
    pub coarse: Point,
    pub refined: Point,
    pub gain: C64,
    pub coarse_statistic: f64,
    pub statistic: f64,
    pub threshold: f64,
}

fn admissible(ctx: &SensingContext, p: &Point) -> bool {
    let nt = ctx.cfg.n() as f64 * ctx.cfg.symbol_time();
    p.tau >= 0.0 && p.tau < nt && p.nu.abs() < ctx.cfg.delta_f() / 2.0 && p.phi.abs() <= FRAC_PI_2
}

/// Best `S` over `center + i * half / factor` per dimension, `i` in `[-factor, factor]`.
/// Points outside the delay-Doppler-angle domain are skipped; ties keep the
/// lowest lexicographic offset.
pub(crate) fn search_box(
    ctx: &SensingContext,
    y: &[Vec<C64>],
    center: Point,
    half: [f64; 3],
    factor: usize,
) -> Option<(Point, f64)> {
    let f = factor.max(1) as i64;
    let axis = |c: f64, h: f64| -> Vec<f64> {
        if h == 0.0 {
            return vec![c];
        }
        (-f..=f).map(|i| c + i as f64 * h / f as f64).collect()
    };
    let nus = axis(center.nu, half[0]);
    let taus = axis(center.tau, half[1]);
    let phis: Vec<f64> = axis(center.phi, half[2]).into_iter().filter(|p| p.abs() <= FRAC_PI_2).collect();
    let factors: Vec<Vec<DMatrix<C64>>> = phis.iter().map(|&p| ctx.spatial_factors(p)).collect();
    let pairs: Vec<(f64, f64)> = nus
        .iter()
        .flat_map(|&nu| taus.iter().map(move |&tau| (nu, tau)))
        .filter(|&(nu, tau)| admissible(ctx, &Point { nu, tau, phi: 0.0 }))
        .collect();
    let nm = ctx.cfg.nm();
    let best: Vec<Option<(Point, f64)>> = pairs
        .par_iter()
        .map(|&(nu, tau)| {
            let op = CrosstalkOperator::rectangular_checked(ctx.cfg, nu, tau).ok()?;
            let proj = Projection::new(ctx, &op);
            let c = proj.correlate(y, nm);
            let mut best: Option<(Point, f64)> = None;
            for (&phi, fac) in phis.iter().zip(&factors) {
                if let Some((num, den)) = proj.evaluate(&c, fac) {
                    let s = num.norm_sqr() / den;
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((Point { nu, tau, phi }, s));
                    }
                }
            }
            best
        })
        .collect();
    best.into_iter().flatten().fold(None, |acc, cand| match acc {
        Some((_, b)) if cand.1 <= b => acc,
        _ => Some(cand),
    })
}

/// Fine search over `+-half` around `center`, followed by `zoom_stages` passes
/// over `+-half / factor^s` around the running best.
pub fn local_search(
    ctx: &SensingContext,
    y: &[Vec<C64>],
    center: Point,
    half: [f64; 3],
    factor: usize,
    zoom_stages: usize,
) -> Option<(Point, f64)> {
    let mut best = search_box(ctx, y, center, half, factor)?;
    let mut h = half;
    for _ in 0..zoom_stages {
        h = h.map(|v| v / factor.max(1) as f64);
        if let Some(cand) = search_box(ctx, y, best.0, h, factor) {
            if cand.1 > best.1 {
                best = cand;
            }
        }
    }
    Some(best)
}

/// Argmax of `S` on a fine grid spanning one coarse cell either side of `cell`.
/// Never returns a lower statistic than the coarse cell itself.
pub fn refine_local(
    ctx: &SensingContext,
    y: &[Vec<C64>],
    grid: &SearchGrid,
    cell: [usize; 3],
    refine_factor: usize,
    zoom_stages: usize,
) -> Result<Option<(Point, f64)>> {
    ctx.check(y)?;
    let coarse = grid.point(cell);
    Ok(local_search(ctx, y, coarse, grid.steps(), refine_factor, zoom_stages))
}

/// `h G_b(nu, tau, phi) x_b` for every block.
pub fn reconstruct(ctx: &SensingContext, point: Point, gain: C64) -> Result<Vec<Vec<C64>>> {
    let op = CrosstalkOperator::rectangular_checked(ctx.cfg, point.nu, point.tau)?;
    let nm = ctx.cfg.nm();
    ctx.schedule
        .matrices
        .iter()
        .zip(ctx.x)
        .map(|(u, xb)| {
            let g = effective_channel(ctx.array, u, ctx.tx, &op, nm, point.phi)?;
            Ok(g.apply(xb).into_iter().map(|v| gain * v).collect())
        })
        .collect()
}

/// `y_b - h G_b x_b` with the refined parameters and gain of `det`.
pub fn sic_cancel(ctx: &SensingContext, y: &[Vec<C64>], det: &Detection) -> Result<Vec<Vec<C64>>> {
    ctx.check(y)?;
    let path = reconstruct(ctx, det.refined, det.gain)?;
    Ok(y.iter()
        .zip(path)
        .map(|(yb, pb)| yb.iter().zip(pb).map(|(a, b)| a - b).collect())
        .collect())
}

/// Threshold, pick the strongest declared cell, refine, estimate the gain,
/// cancel, repeat. Stops on an empty declared set or after `max_detections`.
pub fn detect_all(
    ctx: &SensingContext,
    y: &[Vec<C64>],
    projections: &CoarseProjections,
    cfar: &CfarConfig,
    limits: &DetectLimits,
) -> Result<Vec<Detection>> {
    ctx.check(y)?;
    cfar.validate()?;
    let grid = &projections.grid;
    let mut residual = y.to_vec();
    let mut out = Vec::new();
    while out.len() < limits.max_detections {
        let map = LikelihoodMap::from_projections(ctx, &residual, projections)?;
        let thr = os_cfar_threshold(&map, cfar)?;
        let declared = above_threshold_set(&map, &thr)?;
        let Some(flat) = map.argmax_of(&declared) else { break };
        let cell = grid.unravel(flat);
        let Some((refined, statistic)) =
            refine_local(ctx, &residual, grid, cell, limits.refine_factor, limits.zoom_stages)?
        else {
            break;
        };
        let gain = super::glrt::estimate_gain(ctx, &residual, refined)?.unwrap_or_default();
        let det = Detection {
            order: out.len(),
            coarse_cell: cell,
            coarse: grid.point(cell),
            refined,
            gain,
            coarse_statistic: map.values[flat],
            statistic,
            threshold: thr.values[flat].unwrap_or(f64::NAN),
        };
        residual = sic_cancel(ctx, &residual, &det)?;
        out.push(det);
    }
    Ok(out)
}
