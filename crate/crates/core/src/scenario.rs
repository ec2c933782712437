//! Scenario files: JSON experiment descriptions with unit conversion,
//! validation that reports the offending field, and a content digest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::array::UlaArray;
use crate::beamforming::{FistaParams, ScheduleStrategy};
use crate::channel::{db_to_linear, LinkBudget, SPEED_OF_LIGHT};
use crate::detector::CfarConfig;
use crate::error::{RadarError, Result};
use crate::otfs::OtfsConfig;

/// Preset numerology. `desk` keeps Monte Carlo runs to minutes; `paper`
/// matches the full-size reference system and is expensive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Desk,
    Paper,
}

impl Profile {
    pub fn otfs(&self) -> OtfsConfig {
        match self {
            Profile::Desk => OtfsConfig::new(8, 8, 1e6),
            Profile::Paper => OtfsConfig::new(64, 64, 1e6),
        }
        .expect("preset numerology is valid")
    }

    pub fn array(&self) -> ArraySpec {
        match self {
            Profile::Desk => ArraySpec { n_antennas: 16, n_rf: 4 },
            Profile::Paper => ArraySpec { n_antennas: 64, n_rf: 4 },
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(format!("unknown profile '{other}', expected desk or paper")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub n_antennas: usize,
    pub n_rf: usize,
}

/// Radio parameters as written in the file; bandwidth follows from the frame (`M * df`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSpec {
    pub carrier_hz: f64,
    pub p_avg_dbm: f64,
    pub rcs_m2: f64,
    pub noise_psd_w_hz: f64,
    pub noise_figure_db: f64,
}

impl Default for LinkSpec {
    fn default() -> Self {
        Self { carrier_hz: 28.25e9, p_avg_dbm: 24.0, rcs_m2: 1.0, noise_psd_w_hz: 2e-21, noise_figure_db: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamSpec {
    pub fov_deg: [f64; 2],
    pub tx_transition_deg: f64,
    /// Coarse sector width; also the width of each codebook atom.
    pub coarse_step_deg: f64,
    pub fine_step_deg: f64,
    pub atom_transition_deg: f64,
    pub synthesis_points: usize,
    pub sll_db: f64,
    pub eps_orth: f64,
    pub fista_iterations: usize,
}

impl Default for BeamSpec {
    fn default() -> Self {
        Self {
            fov_deg: [-45.0, 45.0],
            tx_transition_deg: 15.0,
            coarse_step_deg: 15.0,
            fine_step_deg: 5.0,
            atom_transition_deg: 5.0,
            synthesis_points: 181,
            sll_db: -25.0,
            eps_orth: 0.1,
            fista_iterations: 1500,
        }
    }
}

impl BeamSpec {
    pub fn fista(&self) -> FistaParams {
        FistaParams { max_iter: self.fista_iterations, ..FistaParams::default() }
    }

    pub fn fov_rad(&self) -> (f64, f64) {
        (self.fov_deg[0].to_radians(), self.fov_deg[1].to_radians())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSpec {
    pub strategy: ScheduleStrategy,
    pub seed: u64,
    /// Block counts to evaluate; the schedule for the largest is built and shorter ones are its prefixes.
    pub blocks: Vec<usize>,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self { strategy: ScheduleStrategy::FlatTop, seed: 7, blocks: vec![2, 6] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpec {
    pub angle_step_deg: f64,
    pub refine_factor: usize,
    /// Extra refinement passes per detection; each shrinks the box by `refine_factor`.
    /// One pass keeps the cancellation residual of strong targets below the noise.
    pub zoom_stages: usize,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self { angle_step_deg: 1.0, refine_factor: 10, zoom_stages: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CfarSpec {
    pub window: [usize; 3],
    pub guard: [usize; 3],
    pub kappa: f64,
    /// Written by `calibrate-cfar`; detection runs refuse to start without it.
    pub alpha: Option<f64>,
    pub target_pfa: f64,
    /// H0 trials per calibration pass.
    pub calibration_trials: usize,
}

impl Default for CfarSpec {
    fn default() -> Self {
        let c = CfarConfig::default();
        Self {
            window: c.window,
            guard: c.guard,
            kappa: c.kappa,
            alpha: None,
            target_pfa: 1e-3,
            calibration_trials: 100,
        }
    }
}

impl CfarSpec {
    pub fn config(&self, alpha: f64) -> CfarConfig {
        CfarConfig { window: self.window, guard: self.guard, kappa: self.kappa, alpha }
    }

    pub fn calibrated(&self) -> Result<CfarConfig> {
        match self.alpha {
            Some(a) => Ok(self.config(a)),
            None => Err(scenario_err("cfar.alpha", "CFAR scale is not calibrated; run calibrate-cfar first")),
        }
    }
}

/// A point target given by kinematics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub aoa_deg: f64,
}

impl TargetSpec {
    pub fn doppler(&self, link: &LinkSpec) -> f64 {
        2.0 * self.velocity_mps * link.carrier_hz / SPEED_OF_LIGHT
    }

    pub fn delay(&self) -> f64 {
        2.0 * self.range_m / SPEED_OF_LIGHT
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscoverySpec {
    /// One P_d point per range.
    pub ranges_m: Vec<f64>,
    /// Random targets per trial at each range (0 gives pure-noise trials).
    pub targets: usize,
    pub velocity_mps: [f64; 2],
    pub aoa_deg: [f64; 2],
    /// Fixed strong target added to every trial (near-far studies).
    pub near_target: Option<TargetSpec>,
    pub aoa_tolerance_deg: f64,
}

impl Default for DiscoverySpec {
    fn default() -> Self {
        Self {
            ranges_m: vec![20.0, 40.0, 60.0, 80.0, 100.0, 120.0],
            targets: 1,
            velocity_mps: [-30.0, 30.0],
            aoa_deg: [-40.0, 40.0],
            near_target: None,
            aoa_tolerance_deg: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackingSpec {
    pub users: Vec<TargetSpec>,
    pub refine_factor: usize,
    pub zoom_stages: usize,
    pub full_a: bool,
    pub isolation: f64,
}

impl Default for TrackingSpec {
    fn default() -> Self {
        Self {
            users: vec![
                TargetSpec { range_m: 15.0, velocity_mps: 12.0, aoa_deg: -20.0 },
                TargetSpec { range_m: 18.0, velocity_mps: -8.0, aoa_deg: 25.0 },
            ],
            refine_factor: 10,
            zoom_stages: 4,
            full_a: false,
            isolation: crate::estimator::DEFAULT_ISOLATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrlbSpec {
    pub strategies: Vec<ScheduleStrategy>,
    /// Per-symbol receive SNR `A^2 P / sigma^2`.
    pub snr_db: Vec<f64>,
    pub blocks: Vec<usize>,
    pub target: TargetSpec,
}

impl Default for CrlbSpec {
    fn default() -> Self {
        Self {
            strategies: vec![
                ScheduleStrategy::FlatTop,
                ScheduleStrategy::Dft,
                ScheduleStrategy::AntennaSelection,
                ScheduleStrategy::FullyDigital,
            ],
            snr_db: vec![-20.0, -10.0, 0.0, 10.0, 20.0],
            blocks: vec![2, 6],
            target: TargetSpec { range_m: 40.0, velocity_mps: 10.0, aoa_deg: 10.0 },
        }
    }
}

/// Whole experiment description. Sections may be omitted; `otfs` and `array`
/// then come from the profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub profile: Profile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub otfs: Option<OtfsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub array: Option<ArraySpec>,
    #[serde(default)]
    pub link: LinkSpec,
    #[serde(default)]
    pub beams: BeamSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub search: SearchSpec,
    #[serde(default)]
    pub cfar: CfarSpec,
    #[serde(default)]
    pub discovery: DiscoverySpec,
    #[serde(default)]
    pub tracking: TrackingSpec,
    #[serde(default)]
    pub crlb: CrlbSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_trials() -> usize {
    200
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self::for_profile(Profile::Desk)
    }
}

fn scenario_err(path: impl Into<String>, message: impl Into<String>) -> RadarError {
    RadarError::Scenario { path: path.into(), message: message.into() }
}

fn ensure(cond: bool, path: &str, message: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(scenario_err(path, message()))
    }
}

impl ScenarioFile {
    pub fn for_profile(profile: Profile) -> Self {
        Self {
            profile,
            otfs: None,
            array: None,
            link: LinkSpec::default(),
            beams: BeamSpec::default(),
            schedule: ScheduleSpec::default(),
            search: SearchSpec::default(),
            cfar: CfarSpec::default(),
            discovery: DiscoverySpec::default(),
            tracking: TrackingSpec::default(),
            crlb: CrlbSpec::default(),
            trials: default_trials(),
            seed: 0,
        }
    }

    /// Parses and validates; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let sc: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            scenario_err(if path.is_empty() { ".".into() } else { path }, e.into_inner().to_string())
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serialises");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn otfs_config(&self) -> OtfsConfig {
        self.otfs.unwrap_or_else(|| self.profile.otfs())
    }

    pub fn array_spec(&self) -> ArraySpec {
        self.array.unwrap_or_else(|| self.profile.array())
    }

    pub fn ula(&self) -> UlaArray {
        UlaArray { n_antennas: self.array_spec().n_antennas }
    }

    /// SI link budget; bandwidth is `M * df`.
    pub fn link_budget(&self) -> LinkBudget {
        let cfg = self.otfs_config();
        LinkBudget {
            carrier_hz: self.link.carrier_hz,
            bandwidth_hz: cfg.bandwidth(),
            p_avg_w: db_to_linear(self.link.p_avg_dbm) * 1e-3,
            sigma_rcs_m2: self.link.rcs_m2,
            noise_psd_w_hz: self.link.noise_psd_w_hz,
            noise_figure: db_to_linear(self.link.noise_figure_db),
        }
    }

    pub fn max_blocks(&self) -> usize {
        self.schedule.blocks.iter().copied().max().unwrap_or(1)
    }

    fn check_target(&self, t: &TargetSpec, path: &str) -> Result<()> {
        let cfg = self.otfs_config();
        let (lo, hi) = (self.beams.fov_deg[0], self.beams.fov_deg[1]);
        ensure(t.range_m > 0.0 && t.delay() < cfg.symbol_time(), &format!("{path}.range_m"), || {
            format!("range {} m outside the unambiguous (0, {:.2}) m", t.range_m, cfg.symbol_time() * SPEED_OF_LIGHT / 2.0)
        })?;
        let nu = t.doppler(&self.link);
        ensure(nu.abs() < cfg.delta_f() / 2.0, &format!("{path}.velocity_mps"), || {
            format!("velocity {} m/s maps to Doppler {nu:.1} Hz beyond +-df/2", t.velocity_mps)
        })?;
        ensure(t.aoa_deg >= lo && t.aoa_deg <= hi, &format!("{path}.aoa_deg"), || {
            format!("angle {} deg outside the field of view [{lo}, {hi}]", t.aoa_deg)
        })
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = self.otfs_config();
        let arr = self.array_spec();
        ensure(arr.n_antennas >= 2, "array.n_antennas", || "need at least two antennas".into())?;
        ensure(arr.n_rf >= 1 && arr.n_rf <= arr.n_antennas, "array.n_rf", || {
            format!("N_rf = {} must lie in [1, {}]", arr.n_rf, arr.n_antennas)
        })?;
        self.link_budget().validate().map_err(|e| scenario_err("link", e.to_string()))?;

        let b = &self.beams;
        ensure(b.fov_deg[0] < b.fov_deg[1] && b.fov_deg[0] >= -90.0 && b.fov_deg[1] <= 90.0, "beams.fov_deg", || {
            format!("field of view {:?} must be an increasing pair inside [-90, 90]", b.fov_deg)
        })?;
        for (name, v) in [
            ("beams.coarse_step_deg", b.coarse_step_deg),
            ("beams.fine_step_deg", b.fine_step_deg),
            ("beams.tx_transition_deg", b.tx_transition_deg),
            ("beams.atom_transition_deg", b.atom_transition_deg),
        ] {
            ensure(v > 0.0 && v.is_finite(), name, || format!("must be positive, got {v}"))?;
        }
        let ratio = |a: f64, c: f64| (a / c - (a / c).round()).abs() < 1e-9 && a / c >= 1.0 - 1e-9;
        ensure(ratio(b.fov_deg[1] - b.fov_deg[0], b.coarse_step_deg), "beams.coarse_step_deg", || {
            "field of view must be a whole number of coarse steps".into()
        })?;
        ensure(ratio(b.coarse_step_deg, b.fine_step_deg), "beams.fine_step_deg", || {
            "coarse step must be a whole number of fine steps".into()
        })?;
        ensure(b.synthesis_points >= 16, "beams.synthesis_points", || "need at least 16 synthesis points".into())?;
        ensure(b.eps_orth >= 0.0 && b.eps_orth < 1.0, "beams.eps_orth", || "overlap bound must lie in [0, 1)".into())?;
        ensure(b.fista_iterations >= 1, "beams.fista_iterations", || "need at least one iteration".into())?;

        ensure(!self.schedule.blocks.is_empty(), "schedule.blocks", || "list at least one block count".into())?;
        for (i, &nb) in self.schedule.blocks.iter().enumerate() {
            ensure(nb >= 1, &format!("schedule.blocks[{i}]"), || "block count must be positive".into())?;
        }
        let s = &self.search;
        ensure(s.angle_step_deg > 0.0 && s.angle_step_deg <= b.fov_deg[1] - b.fov_deg[0], "search.angle_step_deg", || {
            format!("angle step {} deg must be positive and within the field of view", s.angle_step_deg)
        })?;
        ensure(s.refine_factor >= 1, "search.refine_factor", || "must be at least 1".into())?;

        let c = &self.cfar;
        c.config(c.alpha.unwrap_or(1.0)).validate().map_err(|e| scenario_err("cfar", e.to_string()))?;
        ensure(c.target_pfa > 0.0 && c.target_pfa < 0.5, "cfar.target_pfa", || {
            format!("target false-alarm rate {} outside (0, 0.5)", c.target_pfa)
        })?;
        ensure(c.calibration_trials >= 1, "cfar.calibration_trials", || "need at least one trial".into())?;

        let d = &self.discovery;
        for (i, &r) in d.ranges_m.iter().enumerate() {
            self.check_target(&TargetSpec { range_m: r, velocity_mps: 0.0, aoa_deg: b.fov_deg[0] }, &format!("discovery.ranges_m[{i}]"))
                .map_err(|e| match e {
                    RadarError::Scenario { message, .. } => scenario_err(format!("discovery.ranges_m[{i}]"), message),
                    other => other,
                })?;
        }
        for (name, pair) in [("discovery.velocity_mps", d.velocity_mps), ("discovery.aoa_deg", d.aoa_deg)] {
            ensure(pair[0] <= pair[1], name, || format!("{pair:?} must be an ordered pair"))?;
        }
        for v in d.velocity_mps {
            self.check_target(&TargetSpec { range_m: 1.0, velocity_mps: v, aoa_deg: b.fov_deg[0] }, "discovery")
                .map_err(|e| scenario_err("discovery.velocity_mps", e.to_string()))?;
        }
        ensure(d.aoa_deg[0] >= b.fov_deg[0] && d.aoa_deg[1] <= b.fov_deg[1], "discovery.aoa_deg", || {
            "angle range must lie inside the field of view".into()
        })?;
        if let Some(t) = &d.near_target {
            self.check_target(t, "discovery.near_target")?;
        }
        ensure(d.aoa_tolerance_deg > 0.0, "discovery.aoa_tolerance_deg", || "must be positive".into())?;

        let t = &self.tracking;
        ensure(t.users.len() <= arr.n_rf, "tracking.users", || {
            format!("{} users exceed the {} RF chains", t.users.len(), arr.n_rf)
        })?;
        for (i, u) in t.users.iter().enumerate() {
            self.check_target(u, &format!("tracking.users[{i}]"))?;
        }
        ensure(t.refine_factor >= 1, "tracking.refine_factor", || "must be at least 1".into())?;
        ensure(t.isolation > 0.0, "tracking.isolation", || "must be positive".into())?;

        let k = &self.crlb;
        ensure(!k.strategies.is_empty(), "crlb.strategies", || "list at least one strategy".into())?;
        ensure(k.blocks.iter().all(|&b| b >= 1), "crlb.blocks", || "block counts must be positive".into())?;
        self.check_target(&k.target, "crlb.target")?;
        ensure(self.trials >= 1, "trials", || "need at least one trial".into())?;
        let _ = cfg;
        Ok(())
    }
}

/// Reads `path` and returns the raw text alongside the parsed scenario.
pub fn load_with_text(path: &Path) -> Result<(ScenarioFile, String)> {
    let text = std::fs::read_to_string(path)?;
    Ok((ScenarioFile::from_json(&text)?, text))
}
