//! Shared fixtures for unit tests.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::array::UlaArray;
use crate::beamforming::{ReductionSchedule, ScheduleStrategy};
use crate::channel::stack_streams;
use crate::detector::SensingContext;
use crate::otfs::{generate_symbols, Constellation, DelayDopplerBlock, OtfsConfig};
use crate::rng::{stream, SimRng};
use crate::C64;

pub fn cgauss(rng: &mut SimRng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Random matrix with unit-norm columns.
pub fn random_unit_columns(rows: usize, cols: usize, rng: &mut SimRng) -> DMatrix<C64> {
    let mut m = DMatrix::from_fn(rows, cols, |_, _| cgauss(rng));
    for mut c in m.column_iter_mut() {
        let n = c.norm();
        c /= C64::new(n, 0.0);
    }
    m
}

pub struct Fixture {
    pub cfg: OtfsConfig,
    pub array: UlaArray,
    pub tx: DMatrix<C64>,
    pub schedule: ReductionSchedule,
    pub symbols: Vec<Vec<DelayDopplerBlock>>,
    pub x: Vec<Vec<C64>>,
}

impl Fixture {
    /// Random beams and QPSK symbols; `tx` points its first stream broadside-ish.
    pub fn new(n: usize, na: usize, n_rf: usize, blocks: usize, streams: usize, seed: u64) -> Self {
        let cfg = OtfsConfig::new(n, n, 1e6).unwrap();
        let array = UlaArray::new(na).unwrap();
        let mut rng = stream(seed, &[99]);
        let tx = random_unit_columns(na, streams, &mut rng);
        let matrices = (0..blocks).map(|_| random_unit_columns(na, n_rf, &mut rng)).collect();
        let schedule = ReductionSchedule::fixed(matrices, ScheduleStrategy::FlatTop);
        let symbols: Vec<Vec<DelayDopplerBlock>> = (0..blocks)
            .map(|_| generate_symbols(&cfg, streams, Constellation::Qpsk, 1.0, &mut rng).unwrap())
            .collect();
        let x = symbols.iter().map(|s| stack_streams(s)).collect();
        Self { cfg, array, tx, schedule, symbols, x }
    }

    pub fn ctx(&self) -> SensingContext<'_> {
        SensingContext { cfg: &self.cfg, array: &self.array, tx: &self.tx, schedule: &self.schedule, x: &self.x }
    }

    pub fn noise(&self, sigma2: f64, rng: &mut SimRng) -> Vec<Vec<C64>> {
        let nm = self.cfg.nm();
        self.schedule
            .matrices
            .iter()
            .map(|u| (0..u.ncols() * nm).map(|_| cgauss(rng) * sigma2.sqrt()).collect())
            .collect()
    }
}

pub fn add(a: &[Vec<C64>], b: &[Vec<C64>]) -> Vec<Vec<C64>> {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
}

pub fn norm2(v: &[Vec<C64>]) -> f64 {
    v.iter().flatten().map(|c| c.norm_sqr()).sum()
}
