use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array::UlaArray;
use crate::error::{config_err, Result};
use crate::rng::{stream, tag};
use crate::C64;

use super::Codebook;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleStrategy {
    FlatTop,
    Dft,
    AntennaSelection,
    /// One block observing every antenna; reference only.
    FullyDigital,
}

impl ScheduleStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FlatTop => "flat_top",
            Self::Dft => "dft",
            Self::AntennaSelection => "antenna_selection",
            Self::FullyDigital => "fully_digital",
        }
    }
}

/// Per-block receive projections `U_b` (`N_a x N_rf`, unit-norm columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionSchedule {
    pub matrices: Vec<DMatrix<C64>>,
    pub strategy: ScheduleStrategy,
    pub seed: u64,
    /// Per block: codebook atom, DFT bin or antenna index of each column.
    pub selection: Vec<Vec<usize>>,
    /// Per block: pointing direction of each column where defined (radians).
    pub directions: Vec<Vec<Option<f64>>>,
}

impl ReductionSchedule {
    /// Wraps explicit matrices.
    pub fn fixed(matrices: Vec<DMatrix<C64>>, strategy: ScheduleStrategy) -> Self {
        let selection = matrices.iter().map(|m| (0..m.ncols()).collect()).collect();
        let directions = matrices.iter().map(|m| vec![None; m.ncols()]).collect();
        Self { matrices, strategy, seed: 0, selection, directions }
    }

    /// `U = I`, a single block.
    pub fn fully_digital(arr: &UlaArray) -> Self {
        let mut s = Self::fixed(vec![DMatrix::identity(arr.n_antennas, arr.n_antennas)], ScheduleStrategy::FullyDigital);
        s.selection = vec![(0..arr.n_antennas).collect()];
        s
    }

    pub fn blocks(&self) -> usize {
        self.matrices.len()
    }

    pub fn n_rf(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.ncols())
    }

    /// Largest normalised inner product between two columns of block `b`.
    pub fn max_overlap(&self, b: usize) -> f64 {
        let u = &self.matrices[b];
        let mut worst: f64 = 0.0;
        for i in 0..u.ncols() {
            for j in i + 1..u.ncols() {
                let (p, q) = (u.column(i), u.column(j));
                worst = worst.max(p.dotc(&q).norm() / (p.norm() * q.norm()));
            }
        }
        worst
    }

    /// First `b` blocks.
    pub fn prefix(&self, b: usize) -> Self {
        Self {
            matrices: self.matrices[..b].to_vec(),
            strategy: self.strategy,
            seed: self.seed,
            selection: self.selection[..b].to_vec(),
            directions: self.directions[..b].to_vec(),
        }
    }
}

fn unit_columns(cols: &[nalgebra::DVector<C64>]) -> DMatrix<C64> {
    let n = cols[0].len();
    let mut m = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, &(c / C64::new(c.norm(), 0.0)));
    }
    m
}

/// Enumerates pairwise-compatible atom sets of size `k` (depth-first, capped).
fn compatible_sets(ok: &[Vec<bool>], k: usize, cap: usize) -> Vec<Vec<usize>> {
    fn rec(ok: &[Vec<bool>], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, cap: usize) {
        if out.len() >= cap {
            return;
        }
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for c in start..ok.len() {
            if cur.iter().all(|&p| ok[p][c]) {
                cur.push(c);
                rec(ok, k, c + 1, cur, out, cap);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(ok, k, 0, &mut Vec::new(), &mut out, cap);
    out
}

fn infeasible_pair(cb: &Codebook, ok: &[Vec<bool>], n_rf: usize, eps: f64) -> String {
    // greedy in index order; the first rejection against the chosen set names the pair
    let mut chosen: Vec<usize> = Vec::new();
    let mut blocker = None;
    for c in 0..cb.len() {
        match chosen.iter().find(|&&p| !ok[p][c]) {
            None => chosen.push(c),
            Some(&p) if blocker.is_none() => blocker = Some((p, c)),
            _ => {}
        }
    }
    match blocker {
        Some((p, c)) => format!(
            "cannot place {n_rf} pairwise non-overlapping atoms: atoms {} and {} overlap {:.3} > {eps}",
            cb.label(p),
            cb.label(c),
            cb.overlap(p, c)
        ),
        None => format!("codebook has only {} atoms for {n_rf} RF chains", cb.len()),
    }
}

/// Builds `blocks` reduction matrices with `n_rf` columns each.
///
/// `flat_top` picks, block by block, the compatible atom set (pairwise
/// overlap at most `eps_orth`) with the most beam centres not used in earlier
/// blocks, then the most newly covered coarse sectors; remaining ties are
/// broken at random. The DFT and
/// antenna-selection baselines draw distinct columns, preferring ones not used
/// earlier. Block `b` only depends on blocks `< b` and its own random stream,
/// so a longer schedule extends a shorter one with the same seed.
#[allow(clippy::too_many_arguments)]
pub fn build_schedule(
    cb: &Codebook,
    arr: &UlaArray,
    blocks: usize,
    n_rf: usize,
    strategy: ScheduleStrategy,
    seed: u64,
    eps_orth: f64,
) -> Result<ReductionSchedule> {
    if blocks == 0 || n_rf == 0 {
        return config_err(format!("schedule needs at least one block and one RF chain, got B={blocks}, N_rf={n_rf}"));
    }
    if n_rf > arr.n_antennas {
        return config_err(format!("N_rf={n_rf} exceeds N_a={}", arr.n_antennas));
    }
    let mut matrices = Vec::with_capacity(blocks);
    let mut selection = Vec::with_capacity(blocks);
    let mut directions = Vec::with_capacity(blocks);
    match strategy {
        ScheduleStrategy::FullyDigital => return Ok(ReductionSchedule::fully_digital(arr)),
        ScheduleStrategy::FlatTop => {
            let n = cb.len();
            let ok: Vec<Vec<bool>> = (0..n).map(|p| (0..n).map(|q| p == q || cb.overlap(p, q) <= eps_orth).collect()).collect();
            let sets = compatible_sets(&ok, n_rf, 2_000_000);
            if sets.is_empty() {
                return config_err(infeasible_pair(cb, &ok, n_rf, eps_orth));
            }
            let mut sectors = HashSet::new();
            let mut centers = HashSet::new();
            for b in 0..blocks {
                let score = |s: &Vec<usize>| {
                    let sec: HashSet<usize> = s.iter().map(|&p| cb.atoms[p].coarse).filter(|c| !sectors.contains(c)).collect();
                    let cen = s.iter().filter(|p| !centers.contains(*p)).count();
                    (cen, sec.len())
                };
                let best = sets.iter().map(score).max().expect("non-empty");
                let top: Vec<&Vec<usize>> = sets.iter().filter(|s| score(s) == best).collect();
                let mut rng = stream(seed, &[tag::SCHEDULE, b as u64]);
                let pick = top[rng.random_range(0..top.len())].clone();
                for &p in &pick {
                    sectors.insert(cb.atoms[p].coarse);
                    centers.insert(p);
                }
                let cols: Vec<_> = pick.iter().map(|&p| cb.atoms[p].beam.weights.clone()).collect();
                matrices.push(unit_columns(&cols));
                directions.push(pick.iter().map(|&p| Some(cb.atoms[p].center)).collect());
                selection.push(pick);
            }
        }
        ScheduleStrategy::Dft | ScheduleStrategy::AntennaSelection => {
            let na = arr.n_antennas;
            // candidate columns and their pointing direction
            let cands: Vec<(usize, Option<f64>)> = if strategy == ScheduleStrategy::Dft {
                (0..na)
                    .filter_map(|k| {
                        let kk = if k >= na.div_ceil(2) { k as f64 - na as f64 } else { k as f64 };
                        let s = 2.0 * kk / na as f64;
                        (s.abs() <= 1.0).then(|| s.asin()).filter(|th| *th >= cb.fov.0 - 1e-12 && *th <= cb.fov.1 + 1e-12).map(|th| (k, Some(th)))
                    })
                    .collect()
            } else {
                (0..na).map(|k| (k, None)).collect()
            };
            if cands.len() < n_rf {
                return config_err(format!("only {} {} columns available for N_rf={n_rf}", cands.len(), strategy.name()));
            }
            let mut used = HashSet::new();
            for b in 0..blocks {
                let mut rng = stream(seed, &[tag::SCHEDULE, b as u64]);
                let mut order = cands.clone();
                order.shuffle(&mut rng);
                order.sort_by_key(|(k, _)| used.contains(k));
                let pick: Vec<(usize, Option<f64>)> = order[..n_rf].to_vec();
                let mut u = DMatrix::zeros(na, n_rf);
                for (j, (k, _)) in pick.iter().enumerate() {
                    for n in 0..na {
                        u[(n, j)] = if strategy == ScheduleStrategy::Dft {
                            let ph = 2.0 * std::f64::consts::PI * (n * k) as f64 / na as f64;
                            C64::from_polar(1.0 / (na as f64).sqrt(), ph)
                        } else if n == *k {
                            C64::new(1.0, 0.0)
                        } else {
                            C64::new(0.0, 0.0)
                        };
                    }
                    used.insert(*k);
                }
                matrices.push(u);
                selection.push(pick.iter().map(|p| p.0).collect());
                directions.push(pick.iter().map(|p| p.1).collect());
            }
        }
    }
    Ok(ReductionSchedule { matrices, strategy, seed, selection, directions })
}
