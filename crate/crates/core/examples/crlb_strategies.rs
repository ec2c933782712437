//! Bounds on angle, delay and Doppler for each receive-beamforming strategy,
//! plus the closed-form Fisher matrix checked against its Monte Carlo
//! expectation.
//!
//! cargo run --release --example crlb_strategies

use otfs_radar::beamforming::ScheduleStrategy;
use otfs_radar::crlb::{fisher_closed_form, fisher_monte_carlo, FisherSetup, ParamVector};
use otfs_radar::experiment::{run_crlb_study, Rig};
use otfs_radar::scenario::ScenarioFile;

fn main() -> otfs_radar::Result<()> {
    let mut sc = ScenarioFile::default();
    sc.crlb.snr_db = vec![0.0];
    let rig = Rig::new(&sc)?;
    let report = run_crlb_study(&rig)?;
    println!("{:<18} {:>2} {:>14} {:>14} {:>14}", "strategy", "B", "phi (deg^2)", "tau (s^2)", "nu (Hz^2)");
    for p in &report.points {
        println!(
            "{:<18} {:>2} {:>14.4e} {:>14.4e} {:>14.4e}",
            p.strategy.name(),
            p.blocks,
            p.crlb[2].to_degrees().to_degrees(),
            p.crlb[3],
            p.crlb[4]
        );
    }

    let schedule = rig.schedule(ScheduleStrategy::FlatTop, 2)?;
    let beam = rig.tx.column(0).into_owned();
    let setup = FisherSetup { cfg: &rig.cfg, array: &rig.array, schedule: &schedule, beam: &beam, power: 1.0, noise_variance: 1.0 };
    let t = &sc.crlb.target;
    let theta = ParamVector { amplitude: 1.0, phase: 0.3, phi: t.aoa_deg.to_radians(), tau: t.delay(), nu: t.doppler(&sc.link) };
    let cf = fisher_closed_form(&setup, &theta)?;
    let mc = fisher_monte_carlo(&setup, &theta, 500, 1)?;
    println!("closed form vs 500-draw Monte Carlo Fisher matrix: max normalised gap {:.4}", cf.max_normalized_gap(&mc));
    Ok(())
}
