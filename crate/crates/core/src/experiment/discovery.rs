use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::beamforming::ReductionSchedule;
use crate::channel::Target;
use crate::detector::{detect_all, CfarConfig, CoarseProjections, DetectLimits, Detection, SensingContext};
use crate::error::Result;
use crate::rng::{stream, tag};
use crate::row;
use crate::scenario::TargetSpec;
use crate::stats::wilson_interval;

use super::rig::{draw_symbols, receive, sim_scenario, stacked};
use super::{Artifacts, ResultTable, Rig};

/// Outcome of one trial at one block count.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub range_index: usize,
    pub trial: usize,
    pub blocks: usize,
    /// Randomly placed targets (excluding the fixed near target).
    pub targets: usize,
    pub detected: usize,
    pub near_detected: Option<bool>,
    pub detections: Vec<Detection>,
    /// Index into the trial's target list (near target last) per detection.
    pub matches: Vec<Option<usize>>,
    /// AoA error of the first random target when detected, degrees.
    pub aoa_error_deg: Option<f64>,
    pub truth: Vec<Target>,
}

impl TrialOutcome {
    pub fn false_alarms(&self) -> usize {
        self.matches.iter().filter(|m| m.is_none()).count()
    }
}

/// Detection probability at one range and block count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdPoint {
    pub range_m: f64,
    pub blocks: usize,
    pub trials: usize,
    pub targets: usize,
    pub detected: usize,
    pub pd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub near_pd: Option<f64>,
    pub mean_detections: f64,
    pub mean_false_alarms: f64,
    /// Expected threshold crossings per map at the calibrated rate.
    pub false_alarm_budget: f64,
}

#[derive(Debug, Clone)]
pub struct DiscoveryReport {
    pub points: Vec<PdPoint>,
    pub outcomes: Vec<TrialOutcome>,
    pub artifacts: Artifacts,
}

impl DiscoveryReport {
    pub fn point(&self, range_m: f64, blocks: usize) -> Option<&PdPoint> {
        self.points.iter().find(|p| p.blocks == blocks && (p.range_m - range_m).abs() < 1e-9)
    }
}

fn draw_targets(rig: &Rig, range_m: f64, seed: u64, tags: &[u64]) -> Result<Vec<Target>> {
    let d = &rig.scenario.discovery;
    let mut rng = stream(seed, &[&[tag::TARGET], tags].concat());
    let uniform = |rng: &mut crate::rng::SimRng, r: [f64; 2]| r[0] + (r[1] - r[0]) * rng.random::<f64>();
    let mut out = Vec::with_capacity(d.targets + 1);
    let make = |spec: TargetSpec, rng: &mut crate::rng::SimRng| -> Result<Target> {
        let gain = rig.link.gain_from_range(spec.range_m, rng)?;
        Target::from_kinematics(&rig.cfg, &rig.link, gain, spec.range_m, spec.velocity_mps, spec.aoa_deg.to_radians())
    };
    for _ in 0..d.targets {
        let velocity_mps = uniform(&mut rng, d.velocity_mps);
        let aoa_deg = uniform(&mut rng, d.aoa_deg);
        out.push(make(TargetSpec { range_m, velocity_mps, aoa_deg }, &mut rng)?);
    }
    if let Some(near) = d.near_target {
        out.push(make(near, &mut rng)?);
    }
    Ok(out)
}

/// Greedy one-to-one matching in detection order: each detection takes the
/// closest unmatched target within `tol` radians of angle.
pub fn match_detections(dets: &[Detection], truth: &[Target], tol: f64) -> Vec<Option<usize>> {
    let mut used = vec![false; truth.len()];
    dets.iter()
        .map(|d| {
            let best = truth
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .map(|(i, t)| (i, (d.refined.phi - t.aoa).abs()))
                .filter(|(_, e)| *e <= tol + 1e-12)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            best.map(|(i, _)| {
                used[i] = true;
                i
            })
        })
        .collect()
}

/// One trial at every configured block count. All block counts share the
/// same targets, symbols and noise; fewer blocks see a prefix of the data.
pub fn discovery_trial(
    rig: &Rig,
    schedule: &ReductionSchedule,
    cfar: &CfarConfig,
    range_index: usize,
    trial: usize,
) -> Result<Vec<TrialOutcome>> {
    let sc = &rig.scenario;
    let d = &sc.discovery;
    let seed = sc.seed;
    let tags = [range_index as u64, trial as u64];
    let truth = draw_targets(rig, d.ranges_m[range_index], seed, &tags)?;
    let symbols = draw_symbols(&rig.cfg, 1, rig.link.p_avg_w, schedule.blocks(), seed, &tags)?;
    let sim = sim_scenario(rig, truth.clone(), &rig.tx, schedule)?;
    let y_all = receive(&sim, &symbols, seed, &tags)?;
    let x_all = stacked(&symbols);
    let limits = DetectLimits {
        max_detections: rig.n_rf,
        refine_factor: sc.search.refine_factor,
        zoom_stages: sc.search.zoom_stages,
    };
    let tol = d.aoa_tolerance_deg.to_radians();
    sc.schedule
        .blocks
        .iter()
        .map(|&nb| {
            let sched = schedule.prefix(nb);
            let ctx = SensingContext { cfg: &rig.cfg, array: &rig.array, tx: &rig.tx, schedule: &sched, x: &x_all[..nb] };
            let cp = CoarseProjections::new(&ctx, &rig.grid, &rig.cache)?;
            let detections = detect_all(&ctx, &y_all[..nb], &cp, cfar, &limits)?;
            let matches = match_detections(&detections, &truth, tol);
            let detected = matches.iter().flatten().filter(|&&i| i < d.targets).count();
            let near_detected = d.near_target.map(|_| matches.contains(&Some(d.targets)));
            let aoa_error_deg = matches
                .iter()
                .position(|m| *m == Some(0))
                .filter(|_| d.targets > 0)
                .map(|k| (detections[k].refined.phi - truth[0].aoa).abs().to_degrees());
            Ok(TrialOutcome {
                range_index,
                trial,
                blocks: nb,
                targets: d.targets,
                detected,
                near_detected,
                detections,
                matches,
                aoa_error_deg,
                truth: truth.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct DetectionRecord {
    range_m: f64,
    blocks: usize,
    trial: usize,
    order: usize,
    doppler_hz: f64,
    delay_s: f64,
    aoa_deg: f64,
    gain: Complex64,
    statistic: f64,
    threshold: f64,
    matched_target: Option<usize>,
}

/// Monte Carlo detection probability per configured range and block count.
pub fn run_discovery(rig: &Rig) -> Result<DiscoveryReport> {
    let sc = &rig.scenario;
    let cfar = sc.cfar.calibrated()?;
    let schedule = rig.main_schedule()?;
    let trials = sc.trials;
    let jobs: Vec<(usize, usize)> = (0..sc.discovery.ranges_m.len()).flat_map(|r| (0..trials).map(move |t| (r, t))).collect();
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(r, t)| discovery_trial(rig, &schedule, &cfar, r, t))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(summarize(rig, outcomes))
}

fn summarize(rig: &Rig, outcomes: Vec<TrialOutcome>) -> DiscoveryReport {
    let sc = &rig.scenario;
    let d = &sc.discovery;
    let digest = sc.digest();
    let budget = sc.cfar.target_pfa * rig.grid.len() as f64;
    let mut points = Vec::new();
    for (ri, &range_m) in d.ranges_m.iter().enumerate() {
        for &nb in &sc.schedule.blocks {
            let sel: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.range_index == ri && o.blocks == nb).collect();
            let n = sel.len();
            let total = n * d.targets;
            let detected: usize = sel.iter().map(|o| o.detected).sum();
            let (lo, hi) = if total > 0 { wilson_interval(detected, total) } else { (f64::NAN, f64::NAN) };
            let near_pd = d
                .near_target
                .map(|_| sel.iter().filter(|o| o.near_detected == Some(true)).count() as f64 / n.max(1) as f64);
            points.push(PdPoint {
                range_m,
                blocks: nb,
                trials: n,
                targets: d.targets,
                detected,
                pd: if total > 0 { detected as f64 / total as f64 } else { f64::NAN },
                ci_low: lo,
                ci_high: hi,
                near_pd,
                mean_detections: sel.iter().map(|o| o.detections.len()).sum::<usize>() as f64 / n.max(1) as f64,
                mean_false_alarms: sel.iter().map(|o| o.false_alarms()).sum::<usize>() as f64 / n.max(1) as f64,
                false_alarm_budget: budget,
            });
        }
    }

    let mut trials_table = ResultTable::new(
        "discover_trials",
        sc.seed,
        &digest,
        &["range_m", "blocks", "trial", "targets", "detected", "near_detected", "detections", "false_alarms", "aoa_error_deg"],
    );
    for o in &outcomes {
        trials_table.push(row![
            d.ranges_m[o.range_index],
            o.blocks,
            o.trial,
            o.targets,
            o.detected,
            o.near_detected,
            o.detections.len(),
            o.false_alarms(),
            o.aoa_error_deg
        ]);
    }
    let mut summary = ResultTable::new(
        "discover",
        sc.seed,
        &digest,
        &[
            "range_m",
            "blocks",
            "trials",
            "targets",
            "detected",
            "pd",
            "pd_ci_low",
            "pd_ci_high",
            "near_pd",
            "mean_detections",
            "mean_false_alarms",
            "false_alarm_budget",
        ],
    );
    for p in &points {
        summary.push(row![
            p.range_m,
            p.blocks,
            p.trials,
            p.targets,
            p.detected,
            p.pd,
            p.ci_low,
            p.ci_high,
            p.near_pd,
            p.mean_detections,
            p.mean_false_alarms,
            p.false_alarm_budget
        ]);
    }
    let records: Vec<DetectionRecord> = outcomes
        .iter()
        .flat_map(|o| {
            o.detections.iter().zip(&o.matches).map(move |(det, m)| DetectionRecord {
                range_m: d.ranges_m[o.range_index],
                blocks: o.blocks,
                trial: o.trial,
                order: det.order,
                doppler_hz: det.refined.nu,
                delay_s: det.refined.tau,
                aoa_deg: det.refined.phi.to_degrees(),
                gain: det.gain,
                statistic: det.statistic,
                threshold: det.threshold,
                matched_target: *m,
            })
        })
        .collect();
    let mut artifacts = Artifacts::default();
    artifacts.add_table("discover_summary.csv", &summary);
    artifacts.add_table("discover_trials.csv", &trials_table);
    artifacts.add_json("detections.json", &records);
    DiscoveryReport { points, outcomes, artifacts }
}
