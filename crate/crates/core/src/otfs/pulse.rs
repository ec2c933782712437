use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain_err, RadarError, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    /// `1/sqrt(T)` on `[0, T]`, unit energy.
    Rectangular,
    /// Listed so configurations can name it; the ambiguity function is not available.
    RootRaisedCosine { rolloff: f64 },
}

/// Identical transmit and receive shaping pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub kind: PulseKind,
    pub duration: f64,
}

impl PulseShape {
    pub fn rectangular(duration: f64) -> Self {
        Self { kind: PulseKind::Rectangular, duration }
    }
}

/// `sin(pi x) / (pi x)`.
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - (PI * x).powi(2) / 6.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Rectangular-pulse ambiguity without argument checks; `t` is the pulse duration.
pub(crate) fn rect_ambiguity(t: f64, tau: f64, nu: f64) -> C64 {
    if tau.abs() >= t {
        return C64::new(0.0, 0.0);
    }
    let a = tau.max(0.0);
    let b = t.min(t + tau);
    let width = b - a;
    C64::from_polar(width / t * sinc(nu * width), -PI * nu * (a + b))
}

/// `C(tau, nu) = int g(s) g*(s - tau) e^{-j 2 pi nu s} ds` in closed form.
pub fn cross_ambiguity(pulse: &PulseShape, tau: f64, nu: f64) -> Result<C64> {
    match pulse.kind {
        PulseKind::Rectangular => {
            if !(pulse.duration > 0.0 && tau.is_finite() && nu.is_finite()) {
                return domain_err("ambiguity needs a positive duration and finite arguments");
            }
            Ok(rect_ambiguity(pulse.duration, tau, nu))
        }
        other => Err(RadarError::NotImplemented(format!("ambiguity function for {other:?}"))),
    }
}
