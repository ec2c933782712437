use nalgebra::DVector;

use crate::beamforming::ScheduleStrategy;
use crate::crlb::{crlb, fisher_closed_form, FisherSetup, ParamVector, DEFAULT_CONDITION_CAP};
use crate::error::{config_err, Result};
use crate::row;
use crate::C64;

use super::{Artifacts, ResultTable, Rig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrlbPoint {
    pub strategy: ScheduleStrategy,
    pub blocks: usize,
    pub snr_db: f64,
    /// Bounds on `(A, psi, phi, tau, nu)`.
    pub crlb: [f64; 5],
}

#[derive(Debug, Clone)]
pub struct CrlbReport {
    pub points: Vec<CrlbPoint>,
    pub artifacts: Artifacts,
}

impl CrlbReport {
    pub fn get(&self, strategy: ScheduleStrategy, blocks: usize, snr_db: f64) -> Option<&CrlbPoint> {
        self.points.iter().find(|p| p.strategy == strategy && p.blocks == blocks && (p.snr_db - snr_db).abs() < 1e-9)
    }
}

/// Bounds for the configured target under every strategy, block count and
/// per-symbol SNR `A^2 P / sigma^2` (unit power and noise, so `A^2` is the SNR).
/// The transmit side is the wide discovery beam.
pub fn run_crlb_study(rig: &Rig) -> Result<CrlbReport> {
    let sc = &rig.scenario;
    let k = &sc.crlb;
    if k.strategies.is_empty() {
        return config_err("no strategies to compare");
    }
    let beam: DVector<C64> = rig.tx.column(0).into_owned();
    let t = &k.target;
    let max_b = k.blocks.iter().copied().max().unwrap_or(1);
    let mut points = Vec::new();
    for &strategy in &k.strategies {
        let full = rig.schedule(strategy, max_b)?;
        for &nb in &k.blocks {
            let schedule = full.prefix(nb);
            let setup =
                FisherSetup { cfg: &rig.cfg, array: &rig.array, schedule: &schedule, beam: &beam, power: 1.0, noise_variance: 1.0 };
            for &snr_db in &k.snr_db {
                let theta = ParamVector {
                    amplitude: 10f64.powf(snr_db / 20.0),
                    phase: 0.0,
                    phi: t.aoa_deg.to_radians(),
                    tau: t.delay(),
                    nu: t.doppler(&sc.link),
                };
                let bound = crlb(&fisher_closed_form(&setup, &theta)?, DEFAULT_CONDITION_CAP)?;
                points.push(CrlbPoint { strategy, blocks: nb, snr_db, crlb: bound });
            }
        }
    }
    let mut table = ResultTable::new(
        "crlb",
        sc.seed,
        &sc.digest(),
        &["strategy", "B", "SNR_dB", "crlb_A", "crlb_psi", "crlb_phi_deg2", "crlb_tau_s2", "crlb_nu_hz2"],
    );
    for p in &points {
        let c = p.crlb;
        table.push(row![p.strategy.name(), p.blocks, p.snr_db, c[0], c[1], c[2].to_degrees().to_degrees(), c[3], c[4]]);
    }
    let mut artifacts = Artifacts::default();
    artifacts.add_table("crlb.csv", &table);
    Ok(CrlbReport { points, artifacts })
}
