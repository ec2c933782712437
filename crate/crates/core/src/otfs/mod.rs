//! OTFS frame model: grid configuration, the symplectic transform pair, the
//! rectangular-pulse ambiguity function and the Doppler-delay crosstalk
//! operators (exact and approximated).
//!
//! Blocks are stored row-major with pairing index `k * M + l` (Doppler `k`,
//! delay `l`); the same convention is used for every flattened vector in the
//! crate.

mod approx;
mod block;
mod crosstalk;
mod pulse;
mod symbols;
mod transform;

pub use approx::{psi_approx, ApproxCrosstalk, Part};
pub use block::{DelayDopplerBlock, TimeFrequencyBlock};
pub use crosstalk::{psi_exact, CrosstalkCache, CrosstalkMatrix, CrosstalkOperator};
pub use pulse::{cross_ambiguity, PulseKind, PulseShape};
pub use symbols::{generate_symbols, Constellation};
pub use transform::{isfft, sfft};

use crate::error::{config_err, domain_err, Result};
use crate::C64;
use serde::{Deserialize, Serialize};

/// Frame dimensions and numerology. `T * delta_f == 1` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOtfsConfig", into = "RawOtfsConfig")]
pub struct OtfsConfig {
    n: usize,
    m: usize,
    delta_f: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOtfsConfig {
    n: usize,
    m: usize,
    delta_f_hz: f64,
}

impl TryFrom<RawOtfsConfig> for OtfsConfig {
    type Error = String;
    fn try_from(r: RawOtfsConfig) -> std::result::Result<Self, String> {
        OtfsConfig::new(r.n, r.m, r.delta_f_hz).map_err(|e| e.to_string())
    }
}

impl From<OtfsConfig> for RawOtfsConfig {
    fn from(c: OtfsConfig) -> Self {
        RawOtfsConfig { n: c.n, m: c.m, delta_f_hz: c.delta_f }
    }
}

impl OtfsConfig {
    /// `n` Doppler bins (symbols per frame), `m` delay bins (subcarriers).
    pub fn new(n: usize, m: usize, delta_f: f64) -> Result<Self> {
        if n == 0 || m == 0 {
            return config_err(format!("grid must be non-empty, got N={n}, M={m}"));
        }
        if !(delta_f.is_finite() && delta_f > 0.0) {
            return domain_err(format!("subcarrier spacing must be positive, got {delta_f}"));
        }
        Ok(Self { n, m, delta_f })
    }

    /// Same as [`OtfsConfig::new`] but checks an explicitly supplied symbol time.
    pub fn with_symbol_time(n: usize, m: usize, delta_f: f64, t: f64) -> Result<Self> {
        let cfg = Self::new(n, m, delta_f)?;
        if (t * delta_f - 1.0).abs() > 1e-12 {
            return config_err(format!("T * delta_f must equal 1, got {}", t * delta_f));
        }
        Ok(cfg)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn nm(&self) -> usize {
        self.n * self.m
    }
    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }
    /// Symbol time `T = 1 / delta_f`.
    pub fn symbol_time(&self) -> f64 {
        1.0 / self.delta_f
    }
    /// Delay resolution `T / M`.
    pub fn delay_bin(&self) -> f64 {
        self.symbol_time() / self.m as f64
    }
    /// Doppler resolution `1 / (N T)`.
    pub fn doppler_bin(&self) -> f64 {
        self.delta_f / self.n as f64
    }
    /// Occupied bandwidth `M * delta_f`.
    pub fn bandwidth(&self) -> f64 {
        self.m as f64 * self.delta_f
    }

    /// Checks the unambiguous region `0 <= tau < N T`, `|nu| < M delta_f`.
    pub fn check_delay_doppler(&self, nu: f64, tau: f64) -> Result<()> {
        let nt = self.n as f64 * self.symbol_time();
        if !(tau.is_finite() && (0.0..nt).contains(&tau)) {
            return domain_err(format!("delay {tau:e} s outside [0, {nt:e})"));
        }
        if !(nu.is_finite() && nu.abs() < self.bandwidth()) {
            return domain_err(format!("Doppler {nu:e} Hz outside (-{0:e}, {0:e})", self.bandwidth()));
        }
        Ok(())
    }
}

/// Anything that maps a flattened Doppler-delay block through a crosstalk matrix.
pub trait Crosstalk: Sync {
    /// `out = Psi x`; both slices have length `N * M`.
    fn apply(&self, x: &[C64], out: &mut [C64]);

    fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); x.len()];
        self.apply(x, &mut out);
        out
    }
}

impl Crosstalk for CrosstalkOperator {
    fn apply(&self, x: &[C64], out: &mut [C64]) {
        CrosstalkOperator::apply(self, x, out)
    }
}

impl Crosstalk for ApproxCrosstalk {
    fn apply(&self, x: &[C64], out: &mut [C64]) {
        ApproxCrosstalk::apply(self, Part::Value, x, out)
    }
}

impl Crosstalk for CrosstalkMatrix {
    fn apply(&self, x: &[C64], out: &mut [C64]) {
        let n = self.matrix.nrows();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..n).map(|j| self.matrix[(i, j)] * x[j]).sum();
        }
    }
}
