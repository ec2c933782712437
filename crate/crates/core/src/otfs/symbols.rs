use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain_err, Result};
use crate::C64;

use super::{DelayDopplerBlock, OtfsConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constellation {
    Qpsk,
}

/// Draws one i.i.d. block per stream with `E|x|^2 = power / streams`.
pub fn generate_symbols<R: Rng + ?Sized>(
    cfg: &OtfsConfig,
    streams: usize,
    constellation: Constellation,
    power: f64,
    rng: &mut R,
) -> Result<Vec<DelayDopplerBlock>> {
    if streams < 1 {
        return domain_err("at least one data stream is required");
    }
    if !(power.is_finite() && power > 0.0) {
        return domain_err(format!("symbol power must be positive, got {power}"));
    }
    let amp = (power / streams as f64).sqrt() * std::f64::consts::FRAC_1_SQRT_2;
    Ok((0..streams)
        .map(|_| {
            let data = (0..cfg.nm())
                .map(|_| match constellation {
                    Constellation::Qpsk => {
                        let bits: u8 = rng.random_range(0..4);
                        let re = if bits & 1 == 0 { amp } else { -amp };
                        let im = if bits & 2 == 0 { amp } else { -amp };
                        C64::new(re, im)
                    }
                })
                .collect();
            DelayDopplerBlock::from_vec(cfg.n(), cfg.m(), data).expect("sized from config")
        })
        .collect())
}
