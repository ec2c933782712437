//! The OTFS transform pair and the delay-Doppler crosstalk of a moving,
//! delayed reflector, exact and approximated.
//!
//! cargo run --release --example otfs_frame

use otfs_radar::otfs::{isfft, psi_approx, psi_exact, sfft, DelayDopplerBlock, OtfsConfig, PulseShape};
use otfs_radar::C64;

fn main() -> otfs_radar::Result<()> {
    let cfg = OtfsConfig::new(8, 8, 1e6)?;
    let data: Vec<C64> = (0..cfg.nm()).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
    let x = DelayDopplerBlock::from_vec(cfg.n(), cfg.m(), data)?;
    let back = sfft(&isfft(&x, &cfg)?, &cfg)?;
    let err = x.as_slice().iter().zip(back.as_slice()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("sfft(isfft(x)) max error {err:.2e}");

    let pulse = PulseShape::rectangular(cfg.symbol_time());
    let (nu, tau) = (cfg.doppler_bin(), 2.0 * cfg.delay_bin());
    let exact = psi_exact(&cfg, &pulse, nu, tau)?.matrix;
    let approx = psi_approx(&cfg, nu, tau)?.matrix;
    // on-grid shift: one Doppler bin, two delay bins
    let col = 0;
    let (row, peak) = exact.column(col).iter().enumerate().fold((0, 0.0), |acc, (i, v)| if v.norm() > acc.1 { (i, v.norm()) } else { acc });
    println!("input bin (0,0) lands on (k={}, l={}) with |Psi| = {peak:.3}", row / cfg.m(), row % cfg.m());
    println!("||Psi_exact - Psi_approx||_F / ||Psi_exact||_F = {:.3}", (&exact - &approx).norm() / exact.norm());

    let frac = psi_exact(&cfg, &pulse, 0.3 * cfg.doppler_bin(), 1.4 * cfg.delay_bin())?.matrix;
    let spread = frac.column(col).iter().filter(|v| v.norm() > 0.05).count();
    println!("fractional shift spreads bin (0,0) over {spread} output bins above 0.05");
    Ok(())
}
