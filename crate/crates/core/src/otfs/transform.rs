use std::f64::consts::TAU;

use crate::error::Result;
use crate::C64;

use super::{DelayDopplerBlock, OtfsConfig, TimeFrequencyBlock};

/// `e^{j 2 pi i / len}` for `i in 0..len`.
pub(crate) fn roots(len: usize) -> Vec<C64> {
    (0..len).map(|i| C64::from_polar(1.0, TAU * i as f64 / len as f64)).collect()
}

/// Twiddle tables reused by the operators that apply the transform pair many times.
#[derive(Debug, Clone)]
pub(crate) struct Twiddles {
    n: usize,
    m: usize,
    wn: Vec<C64>,
    wm: Vec<C64>,
}

impl Twiddles {
    pub(crate) fn new(n: usize, m: usize) -> Self {
        Self { n, m, wn: roots(n), wm: roots(m) }
    }

    /// `X[n,m] = sum_{k,l} x[k,l] e^{j2pi(nk/N - ml/M)}`, unnormalised.
    pub(crate) fn isfft(&self, x: &[C64], out: &mut [C64], scratch: &mut Vec<C64>) {
        let (n_, m_) = (self.n, self.m);
        scratch.clear();
        scratch.resize(n_ * m_, C64::new(0.0, 0.0));
        // delay axis: tmp[k,m] = sum_l x[k,l] e^{-j2pi ml/M}
        for k in 0..n_ {
            let row = &x[k * m_..(k + 1) * m_];
            for m in 0..m_ {
                let mut acc = C64::new(0.0, 0.0);
                for (l, &v) in row.iter().enumerate() {
                    acc += v * self.wm[(m * l) % m_].conj();
                }
                scratch[k * m_ + m] = acc;
            }
        }
        for n in 0..n_ {
            let dst = &mut out[n * m_..(n + 1) * m_];
            dst.fill(C64::new(0.0, 0.0));
            for k in 0..n_ {
                let w = self.wn[(n * k) % n_];
                for (d, &s) in dst.iter_mut().zip(&scratch[k * m_..(k + 1) * m_]) {
                    *d += w * s;
                }
            }
        }
    }

    /// `y[k,l] = (1/NM) sum_{n,m} Y[n,m] e^{j2pi(ml/M - nk/N)}`.
    pub(crate) fn sfft(&self, y: &[C64], out: &mut [C64], scratch: &mut Vec<C64>) {
        let (n_, m_) = (self.n, self.m);
        let scale = 1.0 / (n_ * m_) as f64;
        scratch.clear();
        scratch.resize(n_ * m_, C64::new(0.0, 0.0));
        for n in 0..n_ {
            let row = &y[n * m_..(n + 1) * m_];
            for l in 0..m_ {
                let mut acc = C64::new(0.0, 0.0);
                for (m, &v) in row.iter().enumerate() {
                    acc += v * self.wm[(m * l) % m_];
                }
                scratch[n * m_ + l] = acc;
            }
        }
        for k in 0..n_ {
            let dst = &mut out[k * m_..(k + 1) * m_];
            dst.fill(C64::new(0.0, 0.0));
            for n in 0..n_ {
                let w = self.wn[(n * k) % n_].conj() * scale;
                for (d, &s) in dst.iter_mut().zip(&scratch[n * m_..(n + 1) * m_]) {
                    *d += w * s;
                }
            }
        }
    }
}

/// Inverse symplectic finite Fourier transform, Doppler-delay to time-frequency.
pub fn isfft(x: &DelayDopplerBlock, cfg: &OtfsConfig) -> Result<TimeFrequencyBlock> {
    x.check(cfg)?;
    let tw = Twiddles::new(cfg.n(), cfg.m());
    let mut out = TimeFrequencyBlock::for_config(cfg);
    tw.isfft(x.as_slice(), out.as_mut_slice(), &mut Vec::new());
    Ok(out)
}

/// Symplectic finite Fourier transform, time-frequency to Doppler-delay.
pub fn sfft(y: &TimeFrequencyBlock, cfg: &OtfsConfig) -> Result<DelayDopplerBlock> {
    y.check(cfg)?;
    let tw = Twiddles::new(cfg.n(), cfg.m());
    let mut out = DelayDopplerBlock::for_config(cfg);
    tw.sfft(y.as_slice(), out.as_mut_slice(), &mut Vec::new());
    Ok(out)
}
