//! End-to-end checks of the experiment runners at reduced trial counts.

use otfs_radar::beamforming::ScheduleStrategy;
use otfs_radar::experiment::*;
use otfs_radar::scenario::{ScenarioFile, TargetSpec};
use otfs_radar::channel::SPEED_OF_LIGHT as SPEED_OF_LIGHT_M_S;
use otfs_radar::RadarError;

fn desk(seed: u64) -> ScenarioFile {
    let mut sc = ScenarioFile::default();
    sc.seed = seed;
    sc
}

#[test]
fn beam_artifacts_are_complete_and_reproducible() {
    let sc = desk(1);
    let a = synth_beams(&Rig::new(&sc).unwrap()).unwrap();
    let b = synth_beams(&Rig::new(&sc).unwrap()).unwrap();
    assert_eq!(a.artifacts, b.artifacts);
    let expected = ((sc.beams.fov_deg[1] - sc.beams.fov_deg[0]) / sc.beams.coarse_step_deg
        * (sc.beams.coarse_step_deg / sc.beams.fine_step_deg))
        .round() as usize;
    assert_eq!(a.atom_count, expected);
    let manifest: serde_json::Value = serde_json::from_str(a.artifacts.get("codebook.json").unwrap()).unwrap();
    assert_eq!(manifest["atom_count"], expected);
    assert_eq!(manifest["atoms"].as_array().unwrap().len(), expected);
    assert_eq!(manifest["schedules"].as_array().unwrap().len(), 3);
    assert!(a.tx_quality.ripple_db <= 1.0 && a.tx_quality.sll_db <= -15.0);
    assert!(a.tx_power_residual < 1e-10);
}

#[test]
fn calibration_is_deterministic_and_monotone() {
    let mut sc = desk(3);
    sc.cfar.calibration_trials = 20;
    let rig = Rig::new(&sc).unwrap();
    let a = calibrate_cfar(&rig, 0.01).unwrap();
    let b = calibrate_cfar(&rig, 0.01).unwrap();
    assert_eq!(a.alpha, b.alpha);
    assert_eq!(a.artifacts, b.artifacts);
    assert!(a.within(VALIDATION_TOLERANCE));
    assert!(a.sweep.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 >= w[1].1), "{:?}", a.sweep);
    assert!(a.sweep.first().unwrap().1 > a.sweep.last().unwrap().1);
    assert_eq!(a.scenario.cfar.alpha, Some(a.alpha));
    let mut other = sc.clone();
    other.seed = 4;
    assert_ne!(calibrate_cfar(&Rig::new(&other).unwrap(), 0.01).unwrap().alpha, a.alpha);
}

#[test]
fn unreachable_calibration_target_is_a_calibration_error() {
    let mut sc = desk(3);
    sc.cfar.calibration_trials = 2;
    let rig = Rig::new(&sc).unwrap();
    assert!(matches!(calibrate_cfar(&rig, 1e-9), Err(RadarError::Calibration(_))));
}

/// The shipped desk scenario, which carries a calibrated alpha.
fn calibrated(seed: u64) -> ScenarioFile {
    let mut sc = ScenarioFile::load(std::path::Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/desk.json"))).unwrap();
    assert!(sc.cfar.alpha.is_some());
    sc.seed = seed;
    sc
}

#[test]
fn noise_only_discovery_stays_within_false_alarm_budget() {
    let mut sc = calibrated(5);
    sc.discovery.targets = 0;
    sc.discovery.ranges_m = vec![50.0];
    sc.trials = 30;
    let r = run_discovery(&Rig::new(&sc).unwrap()).unwrap();
    for p in &r.points {
        println!("B={} mean detections {:.3} budget {:.3}", p.blocks, p.mean_detections, p.false_alarm_budget);
        assert!(p.mean_detections <= p.false_alarm_budget);
        assert!(p.pd.is_nan());
    }
}

#[test]
fn discovery_rows_do_not_depend_on_trial_order() {
    let mut sc = calibrated(6);
    sc.discovery.ranges_m = vec![25.0, 60.0];
    sc.trials = 6;
    let rig = Rig::new(&sc).unwrap();
    let first = run_discovery(&rig).unwrap();
    let again = run_discovery(&rig).unwrap();
    assert_eq!(first.artifacts, again.artifacts);
    let schedule = rig.main_schedule().unwrap();
    let cfar = sc.cfar.calibrated().unwrap();
    let mut reversed = Vec::new();
    for r in (0..2).rev() {
        for t in (0..6).rev() {
            reversed.push(discovery_trial(&rig, &schedule, &cfar, r, t).unwrap());
        }
    }
    reversed.reverse();
    let flat: Vec<TrialOutcome> = reversed.into_iter().flatten().collect();
    assert_eq!(flat, first.outcomes);
    // one summary row per (range, B)
    assert_eq!(first.points.len(), 4);
}

#[test]
fn discovery_without_calibration_is_refused() {
    let sc = desk(1);
    assert!(matches!(run_discovery(&Rig::new(&sc).unwrap()), Err(RadarError::Scenario { .. })));
}

#[test]
fn crlb_table_is_complete_and_monotone() {
    let sc = desk(1);
    let r = run_crlb_study(&Rig::new(&sc).unwrap()).unwrap();
    let k = &sc.crlb;
    assert_eq!(r.points.len(), k.strategies.len() * k.blocks.len() * k.snr_db.len());
    for &s in &k.strategies {
        for &b in &k.blocks {
            for w in k.snr_db.windows(2) {
                let (lo, hi) = (r.get(s, b, w[0]).unwrap(), r.get(s, b, w[1]).unwrap());
                // the amplitude bound does not depend on the amplitude itself
                assert!((0..5).all(|i| hi.crlb[i] <= lo.crlb[i] * (1.0 + 1e-9)), "{s:?} B={b}");
            }
        }
        for &snr in &k.snr_db {
            let (b2, b6) = (r.get(s, 2, snr).unwrap(), r.get(s, 6, snr).unwrap());
            assert!((0..5).all(|i| b6.crlb[i] <= b2.crlb[i] * (1.0 + 1e-9)), "{s:?} SNR {snr}");
        }
    }
    let csv = r.artifacts.get("crlb.csv").unwrap();
    assert!(csv.contains("strategy,B,SNR_dB,crlb_A,crlb_psi,crlb_phi_deg2,crlb_tau_s2,crlb_nu_hz2"));
    assert!(r.get(ScheduleStrategy::FullyDigital, 6, 0.0).is_some());
}

/// A user whose delay, Doppler and angle sit on the fine search lattice.
fn on_lattice_user(rig: &Rig, l: f64, k: f64, phi_deg: f64, carrier: f64) -> TargetSpec {
    let tau = l * rig.cfg.delay_bin();
    let nu = k * rig.cfg.doppler_bin();
    TargetSpec { range_m: tau * SPEED_OF_LIGHT_M_S / 2.0, velocity_mps: nu * SPEED_OF_LIGHT_M_S / (2.0 * carrier), aoa_deg: phi_deg }
}

#[test]
fn noiseless_on_grid_tracking_has_zero_error() {
    let mut sc = desk(2);
    let rig = Rig::new(&sc).unwrap();
    sc.tracking.users = vec![on_lattice_user(&rig, 0.7, 0.3, -12.4, sc.link.carrier_hz)];
    sc.tracking.zoom_stages = 0;
    sc.trials = 2;
    let rig = Rig::new(&sc).unwrap();
    let mut setup = TrackingSetup::new(&rig).unwrap();
    setup.noise_variance = 0.0;
    let r = run_tracking_with(&rig, &setup).unwrap();
    for e in r.errors.iter().flatten() {
        assert!(e.phi.abs() < 1e-9, "{e:?}");
        assert!(e.tau.abs() < 1e-9 * rig.cfg.delay_bin(), "{e:?}");
        assert!(e.nu.abs() < 1e-9 * rig.cfg.doppler_bin(), "{e:?}");
    }
}

#[test]
fn equal_range_user_pair_degrades_boundedly() {
    let mut one = desk(8);
    one.trials = 60;
    one.tracking.users = vec![TargetSpec { range_m: 15.0, velocity_mps: 6.0, aoa_deg: -20.0 }];
    let mut two = one.clone();
    two.tracking.users.push(TargetSpec { range_m: 15.0, velocity_mps: -6.0, aoa_deg: 25.0 });
    let solo = run_tracking(&Rig::new(&one).unwrap()).unwrap().accuracy[0];
    let pair = run_tracking(&Rig::new(&two).unwrap()).unwrap().accuracy[0];
    let range_factor = pair.rmse[1] / solo.rmse[1];
    let angle_factor = pair.rmse[0] / solo.rmse[0];
    println!("equal-range pair: range RMSE x{range_factor:.2}, AoA RMSE x{angle_factor:.2} against a lone user");
    // cross-user symbol leakage biases the angle, so only a loose bound holds
    assert!(range_factor < 10.0);
    assert!(angle_factor < 10.0);
}

#[test]
fn unisolated_users_are_rejected() {
    let mut sc = desk(1);
    sc.tracking.users = vec![
        TargetSpec { range_m: 15.0, velocity_mps: 0.0, aoa_deg: 10.0 },
        TargetSpec { range_m: 20.0, velocity_mps: 0.0, aoa_deg: 12.0 },
    ];
    let rig = Rig::new(&sc).unwrap();
    assert!(matches!(TrackingSetup::new(&rig), Err(RadarError::Config(_))));
}
