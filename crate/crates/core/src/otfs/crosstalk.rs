use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;

use crate::error::{domain_err, Result};
use crate::C64;

use super::pulse::{cross_ambiguity, rect_ambiguity};
use super::transform::Twiddles;
use super::{OtfsConfig, PulseKind, PulseShape};

/// Dense crosstalk matrix; row `k*M + l` (received bin), column `k'*M + l'` (transmitted bin).
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkMatrix {
    pub nu: f64,
    pub tau: f64,
    pub matrix: DMatrix<C64>,
}

impl CrosstalkMatrix {
    pub fn get(&self, k: usize, kp: usize, l: usize, lp: usize, m: usize) -> C64 {
        self.matrix[(k * m + l, kp * m + lp)]
    }
}

/// Matrix-free exact crosstalk `x -> SFFT(H(ISFFT(x)))` for one `(nu, tau)`.
///
/// The time-frequency channel `H` couples symbol `n'` only into `n = n' + dn`
/// with `|dn T - tau| < T`, so at most two delay taps are stored.
#[derive(Debug, Clone)]
pub struct CrosstalkOperator {
    cfg: OtfsConfig,
    nu: f64,
    tau: f64,
    tw: Twiddles,
    /// `(dn, c[dm + M - 1])` with `c = C(dn T - tau, dm df - nu)`.
    taps: Vec<(usize, Vec<C64>)>,
    /// `e^{j 2 pi n' T nu}`
    time_phase: Vec<C64>,
    /// `e^{-j 2 pi m df tau}`
    freq_phase: Vec<C64>,
}

impl CrosstalkOperator {
    pub fn new(cfg: &OtfsConfig, pulse: &PulseShape, nu: f64, tau: f64) -> Result<Self> {
        cfg.check_delay_doppler(nu, tau)?;
        if !matches!(pulse.kind, PulseKind::Rectangular) {
            // surfaces the not-implemented error
            cross_ambiguity(pulse, 0.0, 0.0)?;
        }
        if (pulse.duration - cfg.symbol_time()).abs() > 1e-12 * cfg.symbol_time() {
            return domain_err("pulse duration must equal the symbol time");
        }
        Ok(Self::rectangular(cfg, nu, tau))
    }

    /// Rectangular pulses of duration `T`; caller has checked the domain.
    pub(crate) fn rectangular(cfg: &OtfsConfig, nu: f64, tau: f64) -> Self {
        let (n_, m_) = (cfg.n(), cfg.m());
        let t = cfg.symbol_time();
        let df = cfg.delta_f();
        let mut taps = Vec::new();
        for dn in 0..n_ {
            let dt = dn as f64 * t - tau;
            if dt.abs() >= t {
                continue;
            }
            let c: Vec<C64> = (0..2 * m_ - 1)
                .map(|i| rect_ambiguity(t, dt, (i as f64 - (m_ as f64 - 1.0)) * df - nu))
                .collect();
            taps.push((dn, c));
        }
        let time_phase = (0..n_).map(|n| C64::from_polar(1.0, TAU * n as f64 * t * nu)).collect();
        let freq_phase = (0..m_).map(|m| C64::from_polar(1.0, -TAU * m as f64 * df * tau)).collect();
        Self { cfg: *cfg, nu, tau, tw: Twiddles::new(n_, m_), taps, time_phase, freq_phase }
    }

    /// Rectangular pulses with the domain check of [`CrosstalkOperator::new`].
    pub fn rectangular_checked(cfg: &OtfsConfig, nu: f64, tau: f64) -> Result<Self> {
        cfg.check_delay_doppler(nu, tau)?;
        Ok(Self::rectangular(cfg, nu, tau))
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn config(&self) -> &OtfsConfig {
        &self.cfg
    }

    /// `out = Psi(nu, tau) x` for a flattened Doppler-delay block.
    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        let (n_, m_) = (self.cfg.n(), self.cfg.m());
        let nm = n_ * m_;
        debug_assert_eq!(x.len(), nm);
        let mut scratch = Vec::with_capacity(nm);
        let mut tf = vec![C64::new(0.0, 0.0); nm];
        self.tw.isfft(x, &mut tf, &mut scratch);
        for (np, row) in tf.chunks_exact_mut(m_).enumerate() {
            let p = self.time_phase[np];
            row.iter_mut().for_each(|v| *v *= p);
        }
        let mut rx = vec![C64::new(0.0, 0.0); nm];
        for (dn, c) in &self.taps {
            for n in *dn..n_ {
                let src = &tf[(n - dn) * m_..(n - dn + 1) * m_];
                let dst = &mut rx[n * m_..(n + 1) * m_];
                for (m, d) in dst.iter_mut().enumerate() {
                    // c index for dm = m - m' is m - m' + M - 1
                    let cs = &c[m..m + m_];
                    let mut acc = C64::new(0.0, 0.0);
                    for (mp, &s) in src.iter().enumerate() {
                        acc += cs[m_ - 1 - mp] * s;
                    }
                    *d += acc;
                }
            }
        }
        for row in rx.chunks_exact_mut(m_) {
            for (v, p) in row.iter_mut().zip(&self.freq_phase) {
                *v *= p;
            }
        }
        self.tw.sfft(&rx, out, &mut scratch);
    }

    /// Materialises the operator column by column.
    pub fn to_matrix(&self) -> CrosstalkMatrix {
        let nm = self.cfg.nm();
        let mut mat = DMatrix::zeros(nm, nm);
        let mut e = vec![C64::new(0.0, 0.0); nm];
        let mut col = vec![C64::new(0.0, 0.0); nm];
        for j in 0..nm {
            e[j] = C64::new(1.0, 0.0);
            self.apply(&e, &mut col);
            e[j] = C64::new(0.0, 0.0);
            for i in 0..nm {
                mat[(i, j)] = col[i];
            }
        }
        CrosstalkMatrix { nu: self.nu, tau: self.tau, matrix: mat }
    }
}

/// Exact Doppler-delay crosstalk matrix for a target at `(nu, tau)`.
pub fn psi_exact(cfg: &OtfsConfig, pulse: &PulseShape, nu: f64, tau: f64) -> Result<CrosstalkMatrix> {
    Ok(CrosstalkOperator::new(cfg, pulse, nu, tau)?.to_matrix())
}

/// Thread-safe memo of exact operators on a fixed `(nu, tau)` lattice.
///
/// Only points lying on the lattice (to 1e-6 of a step) are cached, so the
/// returned operator never depends on which nearby point was requested first.
#[derive(Debug)]
pub struct CrosstalkCache {
    cfg: OtfsConfig,
    nu_step: f64,
    tau_step: f64,
    capacity: usize,
    map: RwLock<HashMap<(i64, i64), Arc<CrosstalkOperator>>>,
}

impl CrosstalkCache {
    pub fn new(cfg: &OtfsConfig, nu_step: f64, tau_step: f64, capacity: usize) -> Self {
        Self { cfg: *cfg, nu_step, tau_step, capacity, map: RwLock::new(HashMap::new()) }
    }

    fn key(&self, nu: f64, tau: f64) -> Option<(i64, i64)> {
        let (a, b) = (nu / self.nu_step, tau / self.tau_step);
        let (ra, rb) = (a.round(), b.round());
        ((a - ra).abs() < 1e-6 && (b - rb).abs() < 1e-6).then_some((ra as i64, rb as i64))
    }

    pub fn get(&self, nu: f64, tau: f64) -> Result<Arc<CrosstalkOperator>> {
        self.cfg.check_delay_doppler(nu, tau)?;
        let Some(key) = self.key(nu, tau) else {
            return Ok(Arc::new(CrosstalkOperator::rectangular(&self.cfg, nu, tau)));
        };
        if let Some(op) = self.map.read().expect("cache lock").get(&key) {
            return Ok(op.clone());
        }
        let op = Arc::new(CrosstalkOperator::rectangular(
            &self.cfg,
            key.0 as f64 * self.nu_step,
            key.1 as f64 * self.tau_step,
        ));
        let mut map = self.map.write().expect("cache lock");
        if map.len() >= self.capacity {
            map.clear();
        }
        Ok(map.entry(key).or_insert(op).clone())
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::otfs::pulse::rect_ambiguity;

    /// Quadruple sum of the crosstalk definition, entry by entry.
    pub(crate) fn psi_brute(cfg: &OtfsConfig, nu: f64, tau: f64) -> DMatrix<C64> {
        let (n_, m_) = (cfg.n(), cfg.m());
        let (t, df) = (cfg.symbol_time(), cfg.delta_f());
        let (nf, mf) = (n_ as f64, m_ as f64);
        let nm = n_ * m_;
        // the (n,m,n',m') kernel does not depend on (k,l,k',l')
        let mut h = vec![C64::new(0.0, 0.0); nm * nm];
        for n in 0..n_ {
            for m in 0..m_ {
                for np in 0..n_ {
                    for mp in 0..m_ {
                        let c = rect_ambiguity(t, (n as f64 - np as f64) * t - tau, (m as f64 - mp as f64) * df - nu);
                        h[(n * m_ + m) * nm + np * m_ + mp] = c
                            * C64::from_polar(1.0, TAU * np as f64 * t * nu)
                            * C64::from_polar(1.0, -TAU * m as f64 * df * tau);
                    }
                }
            }
        }
        let mut out = DMatrix::zeros(nm, nm);
        for k in 0..n_ {
            for l in 0..m_ {
                for kp in 0..n_ {
                    for lp in 0..m_ {
                        let mut acc = C64::new(0.0, 0.0);
                        for n in 0..n_ {
                            for m in 0..m_ {
                                let outer = C64::from_polar(1.0, -TAU * (n as f64 * k as f64 / nf - m as f64 * l as f64 / mf));
                                for np in 0..n_ {
                                    for mp in 0..m_ {
                                        let inner = C64::from_polar(1.0, TAU * (np as f64 * kp as f64 / nf - mp as f64 * lp as f64 / mf));
                                        acc += h[(n * m_ + m) * nm + np * m_ + mp] * inner * outer;
                                    }
                                }
                            }
                        }
                        out[(k * m_ + l, kp * m_ + lp)] = acc / (nf * mf);
                    }
                }
            }
        }
        out
    }

    fn cfg4() -> OtfsConfig {
        OtfsConfig::new(4, 4, 1e6).unwrap()
    }

    #[test]
    fn origin_is_identity() {
        let cfg = cfg4();
        let p = PulseShape::rectangular(cfg.symbol_time());
        let psi = psi_exact(&cfg, &p, 0.0, 0.0).unwrap();
        let id = DMatrix::<C64>::identity(16, 16);
        assert!((psi.matrix.clone() - &id).norm() < 1e-10);
        assert!((psi_brute(&cfg, 0.0, 0.0) - id).norm() < 1e-10);
    }

    #[test]
    fn operator_matches_quadruple_sum() {
        let cfg = cfg4();
        let p = PulseShape::rectangular(cfg.symbol_time());
        for &(nu, tau) in &[(0.13e6, 0.37e-6), (-0.31e6, 1.62e-6), (0.25e6, 0.25e-6), (0.02e6, 3.9e-6)] {
            let fast = psi_exact(&cfg, &p, nu, tau).unwrap().matrix;
            let slow = psi_brute(&cfg, nu, tau);
            assert!((fast - slow).norm() < 1e-10, "nu={nu} tau={tau}");
        }
    }

    #[test]
    fn energy_never_exceeds_matched_case() {
        let cfg = cfg4();
        let p = PulseShape::rectangular(cfg.symbol_time());
        let ref_norm = psi_exact(&cfg, &p, 0.0, 0.0).unwrap().matrix.norm();
        for a in -3i32..=3 {
            for b in 0..4 {
                let nu = a as f64 * cfg.doppler_bin();
                let tau = b as f64 * cfg.delay_bin();
                let nrm = psi_exact(&cfg, &p, nu, tau).unwrap().matrix.norm();
                assert!(nrm <= ref_norm * (1.0 + 1e-12), "nu={nu} tau={tau}");
            }
        }
    }

    #[test]
    fn not_separable_off_grid() {
        let cfg = cfg4();
        let p = PulseShape::rectangular(cfg.symbol_time());
        let (nu, tau) = (0.37 * cfg.doppler_bin(), 1.41 * cfg.delay_bin());
        let joint = psi_exact(&cfg, &p, nu, tau).unwrap().matrix;
        let prod = psi_exact(&cfg, &p, nu, 0.0).unwrap().matrix * psi_exact(&cfg, &p, 0.0, tau).unwrap().matrix;
        assert!((joint - prod).norm() > 1e-3);
    }

    #[test]
    fn domain_checks() {
        let cfg = cfg4();
        let p = PulseShape::rectangular(cfg.symbol_time());
        assert!(psi_exact(&cfg, &p, 0.0, -1e-9).is_err());
        assert!(psi_exact(&cfg, &p, 0.0, 4e-6).is_err());
        assert!(psi_exact(&cfg, &p, 4e6, 0.0).is_err());
        let rrc = PulseShape { kind: PulseKind::RootRaisedCosine { rolloff: 0.1 }, duration: 1e-6 };
        assert!(matches!(psi_exact(&cfg, &rrc, 0.0, 0.0), Err(crate::RadarError::NotImplemented(_))));
    }

    #[test]
    fn cache_returns_lattice_operators() {
        let cfg = cfg4();
        let cache = CrosstalkCache::new(&cfg, cfg.doppler_bin() / 10.0, cfg.delay_bin() / 10.0, 4);
        let a = cache.get(cfg.doppler_bin(), cfg.delay_bin()).unwrap();
        let b = cache.get(cfg.doppler_bin() * (1.0 + 1e-9), cfg.delay_bin()).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
        // off-lattice points are computed but not stored
        cache.get(0.123 * cfg.doppler_bin(), 0.0).unwrap();
        assert_eq!(cache.len(), 1);
        for i in 0..6 {
            cache.get(i as f64 * cfg.doppler_bin() / 10.0, 0.0).unwrap();
        }
        assert!(cache.len() <= 4);
    }
}
