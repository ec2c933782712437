//! One discovery frame: two reflectors under the wide transmit beam, detected
//! by sequential GLRT with CFAR thresholding and cancellation.
//!
//! cargo run --release --example discovery

use otfs_radar::channel::Target;
use otfs_radar::detector::{detect_all, CoarseProjections, DetectLimits, SensingContext};
use otfs_radar::experiment::{draw_symbols, receive, sim_scenario, stacked, Rig};
use otfs_radar::scenario::ScenarioFile;

fn main() -> otfs_radar::Result<()> {
    let mut sc = ScenarioFile::default();
    sc.cfar.alpha = Some(5.3);
    let rig = Rig::new(&sc)?;
    let schedule = rig.main_schedule()?;
    let mut rng = otfs_radar::rng::stream(5, &[0]);
    let targets = vec![
        Target::from_kinematics(&rig.cfg, &rig.link, rig.link.gain_from_range(18.0, &mut rng)?, 18.0, 10.0, (-21.3f64).to_radians())?,
        Target::from_kinematics(&rig.cfg, &rig.link, rig.link.gain_from_range(30.0, &mut rng)?, 30.0, -4.0, 17.6f64.to_radians())?,
    ];
    let symbols = draw_symbols(&rig.cfg, 1, rig.link.p_avg_w, schedule.blocks(), 5, &[1])?;
    let sim = sim_scenario(&rig, targets.clone(), &rig.tx, &schedule)?;
    let y = receive(&sim, &symbols, 5, &[1])?;
    let x = stacked(&symbols);
    let ctx = SensingContext { cfg: &rig.cfg, array: &rig.array, tx: &rig.tx, schedule: &schedule, x: &x };
    let cp = CoarseProjections::new(&ctx, &rig.grid, &rig.cache)?;
    let dets = detect_all(&ctx, &y, &cp, &sc.cfar.calibrated()?, &DetectLimits::new(2))?;
    for t in &targets {
        println!("truth:    r {:6.2} m  v {:+6.2} m/s  phi {:+7.2} deg", t.range(), t.velocity(&rig.link), t.aoa.to_degrees());
    }
    for d in &dets {
        let p = d.refined;
        println!(
            "detected: r {:6.2} m  nu {:+9.0} Hz  phi {:+7.2} deg  S/T = {:.1}",
            p.tau * otfs_radar::channel::SPEED_OF_LIGHT / 2.0,
            p.nu,
            p.phi.to_degrees(),
            d.statistic / d.threshold
        );
    }
    Ok(())
}
