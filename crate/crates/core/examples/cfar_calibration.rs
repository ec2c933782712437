//! Calibrates the OS-CFAR scale on noise-only likelihood maps and checks the
//! false-alarm rate on an independent sample.
//!
//! cargo run --release --example cfar_calibration

use otfs_radar::experiment::{calibrate_cfar, Rig};
use otfs_radar::scenario::ScenarioFile;

fn main() -> otfs_radar::Result<()> {
    let mut sc = ScenarioFile::default();
    sc.seed = 11;
    sc.cfar.calibration_trials = 40;
    let rig = Rig::new(&sc)?;
    println!("coarse grid: {:?} cells, {} neighbours per window", rig.grid.shape(), sc.cfar.config(1.0).neighbor_count());
    for target in [1e-2, 1e-3] {
        let r = calibrate_cfar(&rig, target)?;
        println!(
            "target {target:.0e}: alpha {:.3}, validation rate {:.2e} over {} cells, KS {:.3} (5% critical {:.3})",
            r.alpha, r.validation_pfa, r.validation_cells, r.ks_statistic, r.ks_critical
        );
    }
    Ok(())
}
