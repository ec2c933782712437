use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::beamforming::ReductionSchedule;
use crate::channel::{Target, SPEED_OF_LIGHT};
use crate::crlb::{crlb, fisher_closed_form, FisherSetup, ParamVector, DEFAULT_CONDITION_CAP, IDX_NU, IDX_PHI, IDX_TAU};
use crate::detector::{Point, SearchGrid};
use crate::error::{config_err, Result};
use crate::estimator::{check_isolation, estimate_all, user_beam, EstimatorConfig, TrackedUser};
use crate::rng::{stream, tag};
use crate::row;
use crate::stats::mean;
use crate::C64;

use super::rig::{draw_symbols, receive, sim_scenario};
use super::{Artifacts, ResultTable, Rig};

/// Coarse grid point nearest to `p`.
pub fn nearest_cell(grid: &SearchGrid, p: Point) -> Point {
    let near = |axis: &[f64], v: f64| {
        *axis.iter().min_by(|a, b| (*a - v).abs().total_cmp(&(*b - v).abs())).expect("non-empty axis")
    };
    Point { nu: near(&grid.doppler, p.nu), tau: near(&grid.delay, p.tau), phi: near(&grid.angle, p.phi) }
}

/// Fixed part of a tracking run: users, beams, schedule and bounds.
#[derive(Debug, Clone)]
pub struct TrackingSetup {
    /// True path parameters; gains carry only the amplitude, phases are drawn per trial.
    pub truth: Vec<Target>,
    pub beams: Vec<DVector<C64>>,
    pub tx: DMatrix<C64>,
    pub priors: Vec<Point>,
    pub schedule: ReductionSchedule,
    pub estimator: EstimatorConfig,
    pub noise_variance: f64,
    pub power: f64,
    /// Per user, bounds on `(A, psi, phi, tau, nu)` for a lone target at that user's position.
    pub crlb: Vec<[f64; 5]>,
}

impl TrackingSetup {
    pub fn new(rig: &Rig) -> Result<Self> {
        let sc = &rig.scenario;
        let t = &sc.tracking;
        if t.users.is_empty() {
            return config_err("tracking needs at least one user");
        }
        let mut truth = Vec::new();
        let mut beams = Vec::new();
        for u in &t.users {
            let amp = rig.link.path_gain(u.range_m)?.sqrt();
            truth.push(Target::from_kinematics(&rig.cfg, &rig.link, C64::new(amp, 0.0), u.range_m, u.velocity_mps, u.aoa_deg.to_radians())?);
            beams.push(user_beam(&rig.array, u.aoa_deg.to_radians())?);
        }
        let tx = DMatrix::from_columns(&beams);
        let priors: Vec<Point> = truth
            .iter()
            .map(|p| nearest_cell(&rig.grid, Point { nu: p.doppler, tau: p.delay, phi: p.aoa }))
            .collect();
        let placeholder: Vec<TrackedUser> = beams
            .iter()
            .zip(&priors)
            .map(|(b, p)| TrackedUser { prior: *p, beam: b.clone(), symbols: Vec::new() })
            .collect();
        check_isolation(&rig.array, &placeholder, t.isolation)?;
        let schedule = rig.main_schedule()?;
        let power = rig.link.p_avg_w / truth.len() as f64;
        let noise_variance = rig.link.noise_variance();
        let crlb = truth
            .iter()
            .zip(&beams)
            .map(|(p, beam)| {
                let setup = FisherSetup { cfg: &rig.cfg, array: &rig.array, schedule: &schedule, beam, power, noise_variance };
                let theta = ParamVector { amplitude: p.gain.norm(), phase: 0.0, phi: p.aoa, tau: p.delay, nu: p.doppler };
                crlb(&fisher_closed_form(&setup, &theta)?, DEFAULT_CONDITION_CAP)
            })
            .collect::<Result<Vec<_>>>()?;
        let estimator = EstimatorConfig {
            steps: rig.grid.steps(),
            refine_factor: t.refine_factor,
            zoom_stages: t.zoom_stages,
            full_a: t.full_a,
        };
        Ok(Self { truth, beams, tx, priors, schedule, estimator, noise_variance, power, crlb })
    }
}

/// Per-user errors of one trial (estimate minus truth).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserError {
    pub user: usize,
    pub phi: f64,
    pub tau: f64,
    pub nu: f64,
}

/// One tracking trial with its own gains, symbols and noise.
pub fn tracking_trial(rig: &Rig, setup: &TrackingSetup, trial: usize) -> Result<Vec<UserError>> {
    let seed = rig.scenario.seed;
    let tags = [trial as u64];
    let mut rng = stream(seed, &[tag::GAIN, trial as u64]);
    let targets: Vec<Target> = setup
        .truth
        .iter()
        .map(|p| {
            use rand::Rng;
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            Target { gain: p.gain * C64::from_polar(1.0, phase), ..*p }
        })
        .collect();
    let n_users = targets.len();
    let blocks = setup.schedule.blocks();
    let symbols = draw_symbols(&rig.cfg, n_users, rig.link.p_avg_w, blocks, seed, &tags)?;
    let sim = sim_scenario(rig, targets, &setup.tx, &setup.schedule)?.with_noise_variance(setup.noise_variance);
    let y = receive(&sim, &symbols, seed, &tags)?;
    let users: Vec<TrackedUser> = (0..n_users)
        .map(|p| TrackedUser {
            prior: setup.priors[p],
            beam: setup.beams[p].clone(),
            symbols: symbols.iter().map(|s| s[p].as_slice().to_vec()).collect(),
        })
        .collect();
    let est = estimate_all(&rig.cfg, &rig.array, &setup.schedule, &y, &users, &setup.estimator)?;
    Ok(est
        .iter()
        .zip(&setup.truth)
        .map(|(e, t)| UserError { user: e.user, phi: e.point.phi - t.aoa, tau: e.point.tau - t.delay, nu: e.point.nu - t.doppler })
        .collect())
}

/// RMSE against the bound for one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserAccuracy {
    pub user: usize,
    pub trials: usize,
    pub rmse: [f64; 3],
    /// Square roots of the bounds on `(phi, tau, nu)`.
    pub crlb_std: [f64; 3],
}

impl UserAccuracy {
    /// `10 log10(MSE / CRLB)` per parameter.
    pub fn excess_db(&self) -> [f64; 3] {
        std::array::from_fn(|i| 20.0 * (self.rmse[i] / self.crlb_std[i]).log10())
    }
}

#[derive(Debug, Clone)]
pub struct TrackingReport {
    pub accuracy: Vec<UserAccuracy>,
    pub errors: Vec<Vec<UserError>>,
    pub artifacts: Artifacts,
}

/// Monte Carlo RMSE of `(phi, tau, nu)` per user next to the matching bounds.
pub fn run_tracking(rig: &Rig) -> Result<TrackingReport> {
    let setup = TrackingSetup::new(rig)?;
    run_tracking_with(rig, &setup)
}

pub fn run_tracking_with(rig: &Rig, setup: &TrackingSetup) -> Result<TrackingReport> {
    let sc = &rig.scenario;
    let errors: Vec<Vec<UserError>> =
        (0..sc.trials).into_par_iter().map(|t| tracking_trial(rig, setup, t)).collect::<Result<Vec<_>>>()?;
    let half_c = SPEED_OF_LIGHT / 2.0;
    let v_per_hz = SPEED_OF_LIGHT / (2.0 * rig.link.carrier_hz);
    let digest = sc.digest();

    let mut trials_table = ResultTable::new(
        "track_trials",
        sc.seed,
        &digest,
        &["trial", "user", "phi_err_deg", "range_err_m", "velocity_err_mps", "tau_err_s", "nu_err_hz"],
    );
    for (t, row_errs) in errors.iter().enumerate() {
        for e in row_errs {
            trials_table.push(row![t, e.user, e.phi.to_degrees(), e.tau * half_c, e.nu * v_per_hz, e.tau, e.nu]);
        }
    }
    let mut accuracy = Vec::new();
    for (p, bound) in setup.crlb.iter().enumerate() {
        let pick = |f: fn(&UserError) -> f64| -> f64 {
            let sq: Vec<f64> = errors.iter().map(|r| f(&r[p]).powi(2)).collect();
            mean(&sq).sqrt()
        };
        accuracy.push(UserAccuracy {
            user: p,
            trials: errors.len(),
            rmse: [pick(|e| e.phi), pick(|e| e.tau), pick(|e| e.nu)],
            crlb_std: [bound[IDX_PHI].sqrt(), bound[IDX_TAU].sqrt(), bound[IDX_NU].sqrt()],
        });
    }
    let mut summary = ResultTable::new(
        "track",
        sc.seed,
        &digest,
        &[
            "user",
            "trials",
            "range_m",
            "velocity_mps",
            "aoa_deg",
            "rmse_phi_deg",
            "crlb_phi_deg",
            "rmse_range_m",
            "crlb_range_m",
            "rmse_velocity_mps",
            "crlb_velocity_mps",
            "excess_phi_db",
            "excess_tau_db",
            "excess_nu_db",
        ],
    );
    for (a, u) in accuracy.iter().zip(&sc.tracking.users) {
        let x = a.excess_db();
        summary.push(row![
            a.user,
            a.trials,
            u.range_m,
            u.velocity_mps,
            u.aoa_deg,
            a.rmse[0].to_degrees(),
            a.crlb_std[0].to_degrees(),
            a.rmse[1] * half_c,
            a.crlb_std[1] * half_c,
            a.rmse[2] * v_per_hz,
            a.crlb_std[2] * v_per_hz,
            x[0],
            x[1],
            x[2]
        ]);
    }
    let mut artifacts = Artifacts::default();
    artifacts.add_table("track_summary.csv", &summary);
    artifacts.add_table("track_trials.csv", &trials_table);
    Ok(TrackingReport { accuracy, errors, artifacts })
}
