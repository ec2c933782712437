use serde::Serialize;

use crate::beamforming::{pattern_of, AngleGrid, BeamQuality, ScheduleStrategy};
use crate::error::Result;
use crate::row;

use super::{Artifacts, ResultTable, Rig};

#[derive(Debug, Clone, Serialize)]
struct AtomRecord {
    index: usize,
    coarse: usize,
    fine: usize,
    center_deg: f64,
    /// `[re, im]` per antenna.
    weights: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
struct ScheduleRecord {
    strategy: ScheduleStrategy,
    blocks: usize,
    n_rf: usize,
    selection: Vec<Vec<usize>>,
    directions_deg: Vec<Vec<Option<f64>>>,
    max_overlap: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest {
    version: &'static str,
    config_sha256: String,
    n_antennas: usize,
    fov_deg: [f64; 2],
    coarse_step_deg: f64,
    fine_step_deg: f64,
    n_coarse: usize,
    n_fine: usize,
    atom_count: usize,
    atoms: Vec<AtomRecord>,
    schedules: Vec<ScheduleRecord>,
}

/// Quality figures of the synthesised beams.
#[derive(Debug, Clone)]
pub struct BeamReport {
    pub tx_quality: BeamQuality,
    pub atom_quality: BeamQuality,
    /// `| ||A^H f||^2 - 1 |` of the transmit beam.
    pub tx_power_residual: f64,
    pub atom_count: usize,
    pub tx_iterations: usize,
    /// Largest increase of the objective across any single step (should be <= 0).
    pub tx_max_step_increase: f64,
    pub artifacts: Artifacts,
}

fn db(v: f64) -> f64 {
    20.0 * v.max(1e-300).log10()
}

/// Transmit beam, codebook atoms and every schedule strategy; writes the
/// patterns as CSV and the codebook as a JSON manifest.
pub fn synth_beams(rig: &Rig) -> Result<BeamReport> {
    let sc = &rig.scenario;
    let b = &sc.beams;
    let digest = sc.digest();
    let (fov0, fov1) = b.fov_rad();
    let eval = AngleGrid::uniform_deg(-90.0, 90.0, 0.25)?;
    let a_eval = rig.array.steering_matrix(&eval.angles);

    let tx_quality = BeamQuality::measure(
        rig.tx_beam(),
        &rig.array,
        (fov0 + fov1) / 2.0,
        (fov1 - fov0) / 2.0,
        b.tx_transition_deg.to_radians(),
    );
    let atom_quality = BeamQuality::measure(
        &rig.atom_design.beam,
        &rig.array,
        0.0,
        b.coarse_step_deg.to_radians() / 2.0,
        b.atom_transition_deg.to_radians(),
    );
    let tx_power_residual = (pattern_of(rig.tx_beam(), &rig.array_factor).iter().map(|v| v * v).sum::<f64>() - 1.0).abs();

    let mut tx_table = ResultTable::new("tx_pattern", sc.seed, &digest, &["angle_deg", "gain_db"]);
    for (th, v) in eval.angles.iter().zip(pattern_of(rig.tx_beam(), &a_eval)) {
        tx_table.push(row![th.to_degrees(), db(v)]);
    }

    let mut atom_table = ResultTable::new("codebook_patterns", sc.seed, &digest, &["atom", "center_deg", "angle_deg", "gain_db"]);
    for (p, atom) in rig.codebook.atoms.iter().enumerate() {
        for (th, v) in eval.angles.iter().zip(pattern_of(&atom.beam, &a_eval)) {
            atom_table.push(row![p, atom.center.to_degrees(), th.to_degrees(), db(v)]);
        }
    }

    let mut quality = ResultTable::new(
        "beam_quality",
        sc.seed,
        &digest,
        &["beam", "center_deg", "width_deg", "ripple_db", "sll_db", "main_db", "iterations", "converged"],
    );
    quality.push(row![
        "tx",
        (b.fov_deg[0] + b.fov_deg[1]) / 2.0,
        b.fov_deg[1] - b.fov_deg[0],
        tx_quality.ripple_db,
        tx_quality.sll_db,
        tx_quality.main_db,
        rig.tx_design.iterations,
        rig.tx_design.converged
    ]);
    quality.push(row![
        "atom",
        0.0f64,
        b.coarse_step_deg,
        atom_quality.ripple_db,
        atom_quality.sll_db,
        atom_quality.main_db,
        rig.atom_design.iterations,
        rig.atom_design.converged
    ]);

    let blocks = sc.max_blocks();
    let mut schedules = Vec::new();
    for strategy in [ScheduleStrategy::FlatTop, ScheduleStrategy::Dft, ScheduleStrategy::AntennaSelection] {
        let s = rig.schedule(strategy, blocks)?;
        schedules.push(ScheduleRecord {
            strategy,
            blocks: s.blocks(),
            n_rf: s.n_rf(),
            selection: s.selection.clone(),
            directions_deg: s.directions.iter().map(|d| d.iter().map(|v| v.map(f64::to_degrees)).collect()).collect(),
            max_overlap: (0..s.blocks()).map(|i| s.max_overlap(i)).collect(),
        });
    }
    let cb = &rig.codebook;
    let manifest = Manifest {
        version: super::VERSION,
        config_sha256: digest.clone(),
        n_antennas: rig.array.n_antennas,
        fov_deg: b.fov_deg,
        coarse_step_deg: b.coarse_step_deg,
        fine_step_deg: b.fine_step_deg,
        n_coarse: cb.n_coarse,
        n_fine: cb.n_fine,
        atom_count: cb.len(),
        atoms: cb
            .atoms
            .iter()
            .enumerate()
            .map(|(index, a)| AtomRecord {
                index,
                coarse: a.coarse,
                fine: a.fine,
                center_deg: a.center.to_degrees(),
                weights: a.beam.weights.iter().map(|w| [w.re, w.im]).collect(),
            })
            .collect(),
        schedules,
    };

    let tx_max_step_increase =
        rig.tx_design.checkpoints.iter().map(|(before, after)| after - before).fold(f64::NEG_INFINITY, f64::max);
    let mut artifacts = Artifacts::default();
    artifacts.add_table("tx_pattern.csv", &tx_table);
    artifacts.add_table("codebook_patterns.csv", &atom_table);
    artifacts.add_table("beam_quality.csv", &quality);
    artifacts.add_json("codebook.json", &manifest);
    Ok(BeamReport {
        tx_quality,
        atom_quality,
        tx_power_residual,
        atom_count: cb.len(),
        tx_iterations: rig.tx_design.iterations,
        tx_max_step_increase,
        artifacts,
    })
}
