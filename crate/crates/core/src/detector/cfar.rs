use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, RadarError, Result};

use super::LikelihoodMap;

/// Cells with fewer valid neighbours than this are never declared.
pub const MIN_NEIGHBORS: usize = 8;

/// Ordered-statistic CFAR: rectangular window with a guard box around the cell under test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfarConfig {
    /// Half-widths in (Doppler, delay, angle) index space.
    pub window: [usize; 3],
    pub guard: [usize; 3],
    pub kappa: f64,
    pub alpha: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self { window: [3; 3], guard: [1; 3], kappa: 0.75, alpha: 1.0 }
    }
}

impl CfarConfig {
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Neighbour count of an interior cell.
    pub fn neighbor_count(&self) -> usize {
        let full: usize = self.window.iter().map(|w| 2 * w + 1).product();
        let guard: usize = self.guard.iter().map(|g| 2 * g + 1).product();
        full - guard
    }

    pub fn validate(&self) -> Result<()> {
        if self.window.iter().zip(&self.guard).any(|(w, g)| w <= g) {
            return config_err(format!("CFAR window {:?} must strictly contain guard {:?}", self.window, self.guard));
        }
        if self.neighbor_count() < MIN_NEIGHBORS {
            return config_err(format!("CFAR window has {} neighbours, need {MIN_NEIGHBORS}", self.neighbor_count()));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return config_err(format!("CFAR percentile {} outside (0, 1)", self.kappa));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return config_err(format!("CFAR scale {} must be positive", self.alpha));
        }
        Ok(())
    }
}

/// Adaptive threshold per cell; `None` where the cell is unsearchable or its
/// truncated neighbourhood is too small.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdMap {
    pub values: Vec<Option<f64>>,
}

fn neighbor_values(map: &LikelihoodMap, cfg: &CfarConfig, cell: usize, buf: &mut Vec<f64>) {
    buf.clear();
    let shape = map.grid.shape();
    let c = map.grid.unravel(cell);
    let range = |d: usize| {
        let lo = c[d].saturating_sub(cfg.window[d]);
        let hi = (c[d] + cfg.window[d]).min(shape[d] - 1);
        lo..=hi
    };
    for i in range(0) {
        for j in range(1) {
            for k in range(2) {
                let inside_guard = i.abs_diff(c[0]) <= cfg.guard[0]
                    && j.abs_diff(c[1]) <= cfg.guard[1]
                    && k.abs_diff(c[2]) <= cfg.guard[2];
                if inside_guard {
                    continue;
                }
                let idx = map.grid.index([i, j, k]);
                if map.valid[idx] {
                    buf.push(map.values[idx]);
                }
            }
        }
    }
}

/// `ceil(kappa * n)`-th smallest of `vals` (1-based), clamped to `[1, n]`.
fn order_statistic(vals: &mut [f64], kappa: f64) -> f64 {
    let n = vals.len();
    let k = ((kappa * n as f64).ceil() as usize).clamp(1, n);
    *vals.select_nth_unstable_by(k - 1, f64::total_cmp).1
}

/// Per-cell order statistic of the neighbourhood (threshold before scaling by alpha).
fn reference_levels(map: &LikelihoodMap, cfg: &CfarConfig) -> Result<Vec<Option<f64>>> {
    cfg.validate()?;
    Ok((0..map.values.len())
        .into_par_iter()
        .map_init(Vec::new, |buf, cell| {
            if !map.valid[cell] {
                return None;
            }
            neighbor_values(map, cfg, cell, buf);
            (buf.len() >= MIN_NEIGHBORS).then(|| order_statistic(buf, cfg.kappa))
        })
        .collect())
}

/// `T_r = alpha * S_(ceil(kappa N_c))` over the neighbourhood of each cell.
pub fn os_cfar_threshold(map: &LikelihoodMap, cfg: &CfarConfig) -> Result<ThresholdMap> {
    let values = reference_levels(map, cfg)?.into_iter().map(|r| r.map(|r| cfg.alpha * r)).collect();
    Ok(ThresholdMap { values })
}

/// `S / S_(ceil(kappa N_c))` per cell: the smallest alpha that would still
/// declare the cell. Cells with a zero reference level are dropped.
pub fn cfar_ratios(map: &LikelihoodMap, cfg: &CfarConfig) -> Result<Vec<Option<f64>>> {
    let refs = reference_levels(map, cfg)?;
    Ok(refs
        .into_iter()
        .zip(&map.values)
        .map(|(r, &s)| r.filter(|&r| r > 0.0).map(|r| s / r))
        .collect())
}

/// Cells with `S >= T_r`, in increasing flat index.
pub fn above_threshold_set(map: &LikelihoodMap, thresholds: &ThresholdMap) -> Result<Vec<usize>> {
    if thresholds.values.len() != map.values.len() {
        return config_err(format!(
            "threshold map has {} cells, likelihood map {}",
            thresholds.values.len(),
            map.values.len()
        ));
    }
    Ok(thresholds
        .values
        .iter()
        .zip(&map.values)
        .enumerate()
        .filter_map(|(i, (t, &s))| t.filter(|&t| s >= t).map(|_| i))
        .collect())
}

/// Fraction of `ratios` at or above `alpha`.
pub fn false_alarm_rate(ratios: &[f64], alpha: f64) -> f64 {
    if ratios.is_empty() {
        return 0.0;
    }
    ratios.iter().filter(|&&r| r >= alpha).count() as f64 / ratios.len() as f64
}

/// Bisection on `alpha` until the fraction of H0 `ratios` declared is within
/// `rel_tol` of `target_pfa`.
pub fn calibrate_alpha(ratios: &[f64], target_pfa: f64, rel_tol: f64) -> Result<f64> {
    if !(target_pfa > 0.0 && target_pfa < 0.5) {
        return config_err(format!("target false-alarm probability {target_pfa} outside (0, 0.5)"));
    }
    if ratios.is_empty() {
        return config_err("no H0 cells to calibrate on");
    }
    let (mut lo, mut hi) = (1e-3_f64, 1e6_f64);
    let (p_lo, p_hi) = (false_alarm_rate(ratios, lo), false_alarm_rate(ratios, hi));
    if p_lo < target_pfa || p_hi > target_pfa {
        return Err(RadarError::Calibration(format!(
            "target {target_pfa} outside achievable range [{p_hi}, {p_lo}] for alpha in [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let p = false_alarm_rate(ratios, mid);
        if (p - target_pfa).abs() <= rel_tol * target_pfa {
            return Ok(mid);
        }
        if p > target_pfa {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-12 {
            break;
        }
    }
    let (p_lo, p_hi) = (false_alarm_rate(ratios, lo), false_alarm_rate(ratios, hi));
    Err(RadarError::Calibration(format!(
        "no alpha within {rel_tol} of target {target_pfa}; rate jumps from {p_lo} to {p_hi} near alpha {hi}"
    )))
}

/// Average over cells of the fraction of neighbours above the cell's threshold,
/// i.e. one minus the empirical neighbourhood CDF at `T_r`.
pub fn predicted_false_alarm(map: &LikelihoodMap, cfg: &CfarConfig) -> Result<f64> {
    let thr = os_cfar_threshold(map, cfg)?;
    let parts: Vec<Option<f64>> = thr
        .values
        .par_iter()
        .enumerate()
        .map_init(Vec::new, |buf, (cell, t)| {
            t.map(|t| {
                neighbor_values(map, cfg, cell, buf);
                buf.iter().filter(|&&v| v > t).count() as f64 / buf.len() as f64
            })
        })
        .collect();
    // summed in cell order so the result does not depend on thread scheduling
    let (sum, count) = parts.iter().flatten().fold((0.0, 0usize), |a, v| (a.0 + v, a.1 + 1));
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}
