use rand::Rng;
use rayon::prelude::*;

use crate::beamforming::ReductionSchedule;
use crate::detector::{calibrate_alpha, cfar_ratios, false_alarm_rate, CfarConfig, CoarseProjections, LikelihoodMap, SensingContext};
use crate::error::{RadarError, Result};
use crate::rng::{stream, tag};
use crate::row;
use crate::scenario::ScenarioFile;
use crate::stats::{ks_critical_5pct, ks_statistic};

use super::rig::{draw_symbols, receive, sim_scenario, stacked};
use super::{Artifacts, ResultTable, Rig};

/// Pooled noise-only statistics from one set of trials.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSample {
    /// `S / T_r(alpha = 1)` of every cell with a defined threshold.
    pub ratios: Vec<f64>,
    /// One `S / sigma^2` per trial at a randomly drawn valid cell, for the exponential fit.
    pub normalized: Vec<f64>,
}

/// Noise-only maps on the coarse grid. `pass` separates independent sample sets.
pub fn null_sample(
    rig: &Rig,
    schedule: &ReductionSchedule,
    cfar: &CfarConfig,
    trials: usize,
    seed: u64,
    pass: u64,
) -> Result<NullSample> {
    let sim = sim_scenario(rig, Vec::new(), &rig.tx, schedule)?;
    let power = rig.link.p_avg_w;
    let per_trial: Vec<(Vec<f64>, Option<f64>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let tags = [tag::CALIBRATION, pass, t as u64];
            let symbols = draw_symbols(&rig.cfg, 1, power, schedule.blocks(), seed, &tags)?;
            let x = stacked(&symbols);
            let y = receive(&sim, &symbols, seed, &tags)?;
            let ctx = SensingContext { cfg: &rig.cfg, array: &rig.array, tx: &rig.tx, schedule, x: &x };
            let cp = CoarseProjections::new(&ctx, &rig.grid, &rig.cache)?;
            let map = LikelihoodMap::from_projections(&ctx, &y, &cp)?;
            let ratios: Vec<f64> = cfar_ratios(&map, &cfar.with_alpha(1.0))?.into_iter().flatten().collect();
            let valid: Vec<usize> = (0..map.values.len()).filter(|&i| map.valid[i]).collect();
            let pick = (!valid.is_empty()).then(|| {
                let mut rng = stream(seed, &[&tags[..], &[tag::CALIBRATION]].concat());
                map.values[valid[rng.random_range(0..valid.len())]] / sim.noise_variance
            });
            Ok((ratios, pick))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = NullSample { ratios: Vec::new(), normalized: Vec::new() };
    for (r, p) in per_trial {
        out.ratios.extend(r);
        out.normalized.extend(p);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub kappa: f64,
    pub alpha: f64,
    pub target_pfa: f64,
    pub calibration_pfa: f64,
    pub calibration_cells: usize,
    /// Rate measured with the chosen `alpha` on an independent seed.
    pub validation_pfa: f64,
    pub validation_cells: usize,
    pub ks_statistic: f64,
    pub ks_critical: f64,
    pub ks_samples: usize,
    /// `(alpha, measured rate on the validation set)`.
    pub sweep: Vec<(f64, f64)>,
    /// Input scenario with the calibrated `alpha` filled in.
    pub scenario: ScenarioFile,
    pub artifacts: Artifacts,
}

impl CalibrationReport {
    pub fn within(&self, rel: f64) -> bool {
        (self.validation_pfa / self.target_pfa - 1.0).abs() <= rel
    }
}

/// Relative accuracy required of the validation run.
pub const VALIDATION_TOLERANCE: f64 = 0.25;

/// Bisection for the CFAR scale `alpha` on pooled noise-only maps, then a
/// check on a fresh sample. Fails with a calibration error if the fresh
/// rate misses the target by more than 25%.
pub fn calibrate_cfar(rig: &Rig, target_pfa: f64) -> Result<CalibrationReport> {
    let sc = &rig.scenario;
    let schedule = rig.main_schedule()?;
    let cfar = sc.cfar.config(1.0);
    let trials = sc.cfar.calibration_trials;
    let fit = null_sample(rig, &schedule, &cfar, trials, sc.seed, 0)?;
    let alpha = calibrate_alpha(&fit.ratios, target_pfa, 0.02)?;
    let check = null_sample(rig, &schedule, &cfar, trials, sc.seed, 1)?;
    let validation_pfa = false_alarm_rate(&check.ratios, alpha);
    let mut normalized = fit.normalized.clone();
    normalized.extend(&check.normalized);
    let ks = ks_statistic(&normalized, |v| 1.0 - (-v.max(0.0)).exp());
    let sweep: Vec<(f64, f64)> =
        [0.5, 0.75, 1.0, 1.25, 1.5, 2.0].iter().map(|k| (alpha * k, false_alarm_rate(&check.ratios, alpha * k))).collect();

    let mut scenario = sc.clone();
    scenario.cfar.alpha = Some(alpha);
    scenario.cfar.target_pfa = target_pfa;
    let digest = sc.digest();
    let mut summary = ResultTable::new(
        "calibrate_cfar",
        sc.seed,
        &digest,
        &[
            "kappa",
            "alpha",
            "target_pfa",
            "calibration_pfa",
            "calibration_cells",
            "validation_pfa",
            "validation_cells",
            "ks_statistic",
            "ks_critical_5pct",
            "ks_samples",
        ],
    );
    let ks_critical = ks_critical_5pct(normalized.len());
    summary.push(row![
        cfar.kappa,
        alpha,
        target_pfa,
        false_alarm_rate(&fit.ratios, alpha),
        fit.ratios.len(),
        validation_pfa,
        check.ratios.len(),
        ks,
        ks_critical,
        normalized.len()
    ]);
    let mut sweep_table = ResultTable::new("cfar_sweep", sc.seed, &digest, &["alpha", "measured_pfa"]);
    for (a, p) in &sweep {
        sweep_table.push(row![*a, *p]);
    }
    let mut artifacts = Artifacts::default();
    artifacts.add_table("calibration.csv", &summary);
    artifacts.add_table("cfar_sweep.csv", &sweep_table);
    artifacts.add_text("scenario.calibrated.json", scenario.to_json() + "\n");

    let report = CalibrationReport {
        kappa: cfar.kappa,
        alpha,
        target_pfa,
        calibration_pfa: false_alarm_rate(&fit.ratios, alpha),
        calibration_cells: fit.ratios.len(),
        validation_pfa,
        validation_cells: check.ratios.len(),
        ks_statistic: ks,
        ks_critical,
        ks_samples: normalized.len(),
        sweep,
        scenario,
        artifacts,
    };
    if !report.within(VALIDATION_TOLERANCE) {
        return Err(RadarError::Calibration(format!(
            "alpha {alpha:.4} gives {validation_pfa:.5} on the validation run, outside +-25% of {target_pfa}"
        )));
    }
    Ok(report)
}
