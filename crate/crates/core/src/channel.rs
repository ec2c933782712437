//! Point-target backscatter channel, link budget and the multi-block receive simulator.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::array::{check_angle, UlaArray};
use crate::beamforming::ReductionSchedule;
use crate::error::{config_err, domain_err, Result};
use crate::otfs::{Crosstalk, CrosstalkOperator, DelayDopplerBlock, OtfsConfig};
use crate::C64;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Radio parameters in SI units (noise figure as a linear factor).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub p_avg_w: f64,
    pub sigma_rcs_m2: f64,
    pub noise_psd_w_hz: f64,
    pub noise_figure: f64,
}

impl LinkBudget {
    /// 28.25 GHz carrier, 64 MHz, 24 dBm, 1 m^2, 2e-21 W/Hz, 3 dB noise figure.
    pub fn mmwave_reference() -> Self {
        Self {
            carrier_hz: 28.25e9,
            bandwidth_hz: 64e6,
            p_avg_w: 10f64.powf(2.4) * 1e-3,
            sigma_rcs_m2: 1.0,
            noise_psd_w_hz: 2e-21,
            noise_figure: db_to_linear(3.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("p_avg_w", self.p_avg_w),
            ("noise_psd_w_hz", self.noise_psd_w_hz),
            ("noise_figure", self.noise_figure),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return domain_err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.sigma_rcs_m2.is_finite() && self.sigma_rcs_m2 >= 0.0) {
            return domain_err("radar cross section must be non-negative");
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// `sigma_w^2 = N0 * W * NF`.
    pub fn noise_variance(&self) -> f64 {
        self.noise_psd_w_hz * self.bandwidth_hz * self.noise_figure
    }

    /// Two-way power gain `lambda^2 sigma / ((4 pi)^3 r^4)`.
    pub fn path_gain(&self, range_m: f64) -> Result<f64> {
        if !(range_m.is_finite() && range_m > 0.0) {
            return domain_err(format!("range must be positive, got {range_m}"));
        }
        Ok(self.wavelength().powi(2) * self.sigma_rcs_m2 / ((4.0 * PI).powi(3) * range_m.powi(4)))
    }

    pub fn radar_snr(&self, range_m: f64) -> Result<f64> {
        Ok(self.path_gain(range_m)? * self.p_avg_w / self.noise_variance())
    }

    /// Range at which [`LinkBudget::radar_snr`] equals `snr`.
    pub fn range_for_snr(&self, snr: f64) -> Result<f64> {
        if !(snr > 0.0) {
            return domain_err("target SNR must be positive");
        }
        let k = self.radar_snr(1.0)?;
        Ok((k / snr).powf(0.25))
    }

    /// Gain with `|h|^2` equal to the path gain and uniform phase.
    pub fn gain_from_range<R: Rng + ?Sized>(&self, range_m: f64, rng: &mut R) -> Result<C64> {
        let amp = self.path_gain(range_m)?.sqrt();
        Ok(C64::from_polar(amp, rng.random::<f64>() * TAU))
    }
}

/// One point scatterer. `gain` already includes the `e^{j 2 pi nu tau}` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub gain: C64,
    pub doppler: f64,
    pub delay: f64,
    pub aoa: f64,
}

impl Target {
    /// Rejects delays outside `[0, N T)`, Doppler outside `(-df/2, df/2)` and angles beyond endfire.
    pub fn new(cfg: &OtfsConfig, gain: C64, doppler: f64, delay: f64, aoa: f64) -> Result<Self> {
        let nt = cfg.n() as f64 * cfg.symbol_time();
        if !(delay.is_finite() && delay >= 0.0 && delay < nt) {
            return domain_err(format!("delay {delay:e} s outside [0, {nt:e})"));
        }
        if !(doppler.is_finite() && doppler.abs() < cfg.delta_f() / 2.0) {
            return domain_err(format!("Doppler {doppler:e} Hz outside +-{:e}", cfg.delta_f() / 2.0));
        }
        check_angle(aoa)?;
        Ok(Self { gain, doppler, delay, aoa })
    }

    /// Round-trip conversion `nu = 2 v f_c / c`, `tau = 2 r / c`.
    pub fn from_kinematics(
        cfg: &OtfsConfig,
        link: &LinkBudget,
        gain: C64,
        range_m: f64,
        velocity_mps: f64,
        aoa: f64,
    ) -> Result<Self> {
        Self::new(cfg, gain, 2.0 * velocity_mps * link.carrier_hz / SPEED_OF_LIGHT, 2.0 * range_m / SPEED_OF_LIGHT, aoa)
    }

    /// From the reflection coefficient `rho`: `h = rho e^{j 2 pi nu tau}`.
    pub fn from_reflectivity(cfg: &OtfsConfig, rho: C64, doppler: f64, delay: f64, aoa: f64) -> Result<Self> {
        Self::new(cfg, rho * C64::from_polar(1.0, TAU * doppler * delay), doppler, delay, aoa)
    }

    pub fn range(&self) -> f64 {
        self.delay * SPEED_OF_LIGHT / 2.0
    }

    pub fn velocity(&self, link: &LinkBudget) -> f64 {
        self.doppler * SPEED_OF_LIGHT / (2.0 * link.carrier_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolutions {
    pub velocity_mps: f64,
    pub range_m: f64,
    pub angle_rad: f64,
}

/// Velocity `cW/(2NM f_c)`, range `c/(2W)`, angle `1.22 lambda / L` with aperture `L = N_a lambda / 2`.
pub fn resolutions(cfg: &OtfsConfig, link: &LinkBudget, arr: &UlaArray) -> Resolutions {
    let w = link.bandwidth_hz;
    Resolutions {
        velocity_mps: SPEED_OF_LIGHT * w / (2.0 * cfg.nm() as f64 * link.carrier_hz),
        range_m: SPEED_OF_LIGHT / (2.0 * w),
        angle_rad: 2.44 / arr.n_antennas as f64,
    }
}

/// `U^H a(phi) a(phi)^H F`, the `N_rf x N_s` spatial factor of the effective channel.
pub fn spatial_factor(u: &DMatrix<C64>, f: &DMatrix<C64>, a: &DVector<C64>) -> DMatrix<C64> {
    let ua = u.ad_mul(a);
    let af = a.ad_mul(f);
    ua * af
}

/// `(U^H a a^H F) (x) Psi`, kept in factored form.
#[derive(Debug, Clone)]
pub struct EffectiveChannel<'a, X: Crosstalk + ?Sized> {
    pub factor: DMatrix<C64>,
    pub psi: &'a X,
    nm: usize,
}

impl<'a, X: Crosstalk + ?Sized> EffectiveChannel<'a, X> {
    pub fn n_rf(&self) -> usize {
        self.factor.nrows()
    }
    pub fn n_streams(&self) -> usize {
        self.factor.ncols()
    }

    /// `G x` with `x` stacked stream-major (`q * NM + i`); output stacked `r * NM + i`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let nm = self.nm;
        let z: Vec<Vec<C64>> = x.chunks_exact(nm).map(|xq| self.psi.apply_vec(xq)).collect();
        let mut out = vec![C64::new(0.0, 0.0); self.n_rf() * nm];
        for r in 0..self.n_rf() {
            let dst = &mut out[r * nm..(r + 1) * nm];
            for (q, zq) in z.iter().enumerate() {
                let c = self.factor[(r, q)];
                for (d, v) in dst.iter_mut().zip(zq) {
                    *d += c * v;
                }
            }
        }
        out
    }

    /// Dense Kronecker product given the dense crosstalk matrix.
    pub fn materialize(&self, psi: &DMatrix<C64>) -> DMatrix<C64> {
        self.factor.kronecker(psi)
    }
}

pub fn effective_channel<'a, X: Crosstalk + ?Sized>(
    arr: &UlaArray,
    u: &DMatrix<C64>,
    f: &DMatrix<C64>,
    psi: &'a X,
    nm: usize,
    phi: f64,
) -> Result<EffectiveChannel<'a, X>> {
    if u.nrows() != arr.n_antennas || f.nrows() != arr.n_antennas {
        return config_err(format!(
            "beam matrices have {} and {} rows, array has {} elements",
            u.nrows(),
            f.nrows(),
            arr.n_antennas
        ));
    }
    let a = arr.steering_vector(phi)?;
    Ok(EffectiveChannel { factor: spatial_factor(u, f, &a), psi, nm })
}

/// Everything needed to synthesise the received blocks.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: OtfsConfig,
    pub array: UlaArray,
    pub link: LinkBudget,
    pub targets: Vec<Target>,
    /// `N_a x N_s` transmit beams.
    pub tx: DMatrix<C64>,
    pub schedule: ReductionSchedule,
    /// Per-entry receiver noise variance; defaults to the link budget value.
    pub noise_variance: f64,
}

impl Scenario {
    pub fn new(
        cfg: OtfsConfig,
        array: UlaArray,
        link: LinkBudget,
        targets: Vec<Target>,
        tx: DMatrix<C64>,
        schedule: ReductionSchedule,
    ) -> Result<Self> {
        link.validate()?;
        if tx.nrows() != array.n_antennas || tx.ncols() == 0 {
            return config_err(format!("transmit beams must be {} x N_s, got {} x {}", array.n_antennas, tx.nrows(), tx.ncols()));
        }
        for (b, u) in schedule.matrices.iter().enumerate() {
            if u.nrows() != array.n_antennas {
                return config_err(format!("reduction matrix {b} has {} rows, expected {}", u.nrows(), array.n_antennas));
            }
        }
        if schedule.matrices.is_empty() {
            return config_err("schedule has no blocks");
        }
        let noise_variance = link.noise_variance();
        Ok(Self { cfg, array, link, targets, tx, schedule, noise_variance })
    }

    pub fn with_noise_variance(mut self, v: f64) -> Self {
        self.noise_variance = v;
        self
    }

    pub fn blocks(&self) -> usize {
        self.schedule.matrices.len()
    }
    pub fn n_rf(&self) -> usize {
        self.schedule.n_rf()
    }
    pub fn n_streams(&self) -> usize {
        self.tx.ncols()
    }
}

/// Stacks per-stream blocks stream-major.
pub fn stack_streams(blocks: &[DelayDopplerBlock]) -> Vec<C64> {
    blocks.iter().flat_map(|b| b.as_slice().iter().copied()).collect()
}

/// Noisy receive vectors `y_b = sum_p h_p G_b(p) x_b + w_b`, one per block.
///
/// `symbols[b]` holds the `N_s` stream blocks of block `b`.
pub fn simulate_rx<R: Rng + ?Sized>(
    sc: &Scenario,
    symbols: &[Vec<DelayDopplerBlock>],
    rng: &mut R,
) -> Result<Vec<Vec<C64>>> {
    if symbols.len() != sc.blocks() {
        return config_err(format!("{} symbol blocks for {} schedule blocks", symbols.len(), sc.blocks()));
    }
    let ops = target_operators(sc);
    symbols.iter().enumerate().map(|(b, s)| simulate_block_with(sc, &ops, b, s, rng)).collect()
}

/// Receive vector of block `b` alone; lets callers give each block its own noise stream.
pub fn simulate_block<R: Rng + ?Sized>(
    sc: &Scenario,
    b: usize,
    symbols: &[DelayDopplerBlock],
    rng: &mut R,
) -> Result<Vec<C64>> {
    if b >= sc.blocks() {
        return config_err(format!("block {b} outside a {}-block schedule", sc.blocks()));
    }
    simulate_block_with(sc, &target_operators(sc), b, symbols, rng)
}

fn target_operators(sc: &Scenario) -> Vec<CrosstalkOperator> {
    sc.targets.iter().map(|t| CrosstalkOperator::rectangular(&sc.cfg, t.doppler, t.delay)).collect()
}

fn simulate_block_with<R: Rng + ?Sized>(
    sc: &Scenario,
    ops: &[CrosstalkOperator],
    b: usize,
    symbols: &[DelayDopplerBlock],
    rng: &mut R,
) -> Result<Vec<C64>> {
    if symbols.len() != sc.n_streams() {
        return config_err(format!("block {b} carries {} streams, beams expect {}", symbols.len(), sc.n_streams()));
    }
    for blk in symbols {
        blk.check(&sc.cfg)?;
    }
    if sc.noise_variance < 0.0 {
        return domain_err("noise variance must be non-negative");
    }
    let nm = sc.cfg.nm();
    let u = &sc.schedule.matrices[b];
    let x = stack_streams(symbols);
    let mut y = vec![C64::new(0.0, 0.0); u.ncols() * nm];
    for (t, op) in sc.targets.iter().zip(ops) {
        let g = effective_channel(&sc.array, u, &sc.tx, op, nm, t.aoa)?;
        for (d, v) in y.iter_mut().zip(g.apply(&x)) {
            *d += t.gain * v;
        }
    }
    if sc.noise_variance > 0.0 {
        let s = (sc.noise_variance / 2.0).sqrt();
        for d in y.iter_mut() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *d += C64::new(re * s, im * s);
        }
    }
    Ok(y)
}
