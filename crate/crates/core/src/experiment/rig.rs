use nalgebra::DMatrix;

use crate::array::UlaArray;
use crate::beamforming::{
    array_factor_matrix, build_codebook, build_schedule, design_flat_top, AngleGrid, BeamVector, Codebook,
    FistaOutcome, ReductionSchedule, ScheduleStrategy,
};
use crate::channel::{stack_streams, LinkBudget, Scenario, Target};
use crate::detector::SearchGrid;
use crate::error::Result;
use crate::otfs::{generate_symbols, Constellation, CrosstalkCache, DelayDopplerBlock, OtfsConfig};
use crate::rng::{stream, tag};
use crate::scenario::ScenarioFile;
use crate::C64;

/// Everything derived once from a scenario: frame, array, beams, codebook
/// and the coarse search grid.
#[derive(Debug)]
pub struct Rig {
    pub scenario: ScenarioFile,
    pub cfg: OtfsConfig,
    pub array: UlaArray,
    pub n_rf: usize,
    pub link: LinkBudget,
    pub synthesis_grid: AngleGrid,
    pub array_factor: DMatrix<C64>,
    /// Wide transmit beam over the field of view.
    pub tx_design: FistaOutcome,
    /// Boresight codebook atom before steering.
    pub atom_design: FistaOutcome,
    pub codebook: Codebook,
    /// Transmit matrix used in discovery: the wide beam at unit Euclidean norm.
    pub tx: DMatrix<C64>,
    pub grid: SearchGrid,
    pub cache: CrosstalkCache,
}

impl Rig {
    pub fn new(scenario: &ScenarioFile) -> Result<Self> {
        scenario.validate()?;
        let cfg = scenario.otfs_config();
        let spec = scenario.array_spec();
        let array = UlaArray::new(spec.n_antennas)?;
        let b = &scenario.beams;
        let synthesis_grid = AngleGrid::synthesis(b.synthesis_points)?;
        let array_factor = array_factor_matrix(&array, &synthesis_grid);
        let (fov0, fov1) = b.fov_rad();
        let fista = b.fista();
        let tx_design = design_flat_top(
            &array,
            &synthesis_grid,
            (fov0 + fov1) / 2.0,
            fov1 - fov0,
            b.tx_transition_deg.to_radians(),
            b.sll_db,
            &fista,
        )?;
        let atom_design = design_flat_top(
            &array,
            &synthesis_grid,
            0.0,
            b.coarse_step_deg.to_radians(),
            b.atom_transition_deg.to_radians(),
            b.sll_db,
            &fista,
        )?;
        let codebook = build_codebook(
            &array,
            &array_factor,
            (fov0, fov1),
            b.coarse_step_deg.to_radians(),
            b.fine_step_deg.to_radians(),
            &atom_design.beam,
        )?;
        let tx = DMatrix::from_column_slice(spec.n_antennas, 1, tx_design.beam.unit_norm().as_slice());
        let angles = AngleGrid::uniform_deg(b.fov_deg[0], b.fov_deg[1], scenario.search.angle_step_deg)?;
        let grid = SearchGrid::new(&cfg, &angles)?;
        let cache = CrosstalkCache::new(&cfg, cfg.doppler_bin(), cfg.delay_bin(), 4 * cfg.nm());
        Ok(Self {
            scenario: scenario.clone(),
            cfg,
            array,
            n_rf: spec.n_rf,
            link: scenario.link_budget(),
            synthesis_grid,
            array_factor,
            tx_design,
            atom_design,
            codebook,
            tx,
            grid,
            cache,
        })
    }

    pub fn tx_beam(&self) -> &BeamVector {
        &self.tx_design.beam
    }

    /// Receive schedule with `blocks` blocks. The fully-digital reference
    /// repeats `U = I` so it integrates over the same number of blocks.
    pub fn schedule(&self, strategy: ScheduleStrategy, blocks: usize) -> Result<ReductionSchedule> {
        match strategy {
            ScheduleStrategy::FullyDigital => {
                let one = ReductionSchedule::fully_digital(&self.array);
                let mut s = ReductionSchedule::fixed(vec![one.matrices[0].clone(); blocks], strategy);
                s.selection = vec![one.selection[0].clone(); blocks];
                Ok(s)
            }
            _ => build_schedule(
                &self.codebook,
                &self.array,
                blocks,
                self.n_rf,
                strategy,
                self.scenario.schedule.seed,
                self.scenario.beams.eps_orth,
            ),
        }
    }

    /// The configured schedule at its largest block count.
    pub fn main_schedule(&self) -> Result<ReductionSchedule> {
        self.schedule(self.scenario.schedule.strategy, self.scenario.max_blocks())
    }
}

/// Per-block QPSK symbols for `streams` streams, block `b` drawn from
/// `stream(seed, [tags.., SYMBOLS, b])` so fewer blocks are a prefix of more.
pub fn draw_symbols(
    cfg: &OtfsConfig,
    streams: usize,
    power: f64,
    blocks: usize,
    seed: u64,
    tags: &[u64],
) -> Result<Vec<Vec<DelayDopplerBlock>>> {
    (0..blocks)
        .map(|b| {
            let mut rng = stream(seed, &[tags, &[tag::SYMBOLS, b as u64]].concat());
            generate_symbols(cfg, streams, Constellation::Qpsk, power, &mut rng)
        })
        .collect()
}

pub fn stacked(symbols: &[Vec<DelayDopplerBlock>]) -> Vec<Vec<C64>> {
    symbols.iter().map(|s| stack_streams(s)).collect()
}

/// Received blocks with noise for block `b` drawn from `stream(seed, [tags.., NOISE, b])`.
pub fn receive(sc: &Scenario, symbols: &[Vec<DelayDopplerBlock>], seed: u64, tags: &[u64]) -> Result<Vec<Vec<C64>>> {
    (0..sc.blocks())
        .map(|b| {
            let mut rng = stream(seed, &[tags, &[tag::NOISE, b as u64]].concat());
            crate::channel::simulate_block(sc, b, &symbols[b], &mut rng)
        })
        .collect()
}

/// Builds the simulation scenario for `targets` under `schedule`.
pub fn sim_scenario(rig: &Rig, targets: Vec<Target>, tx: &DMatrix<C64>, schedule: &ReductionSchedule) -> Result<Scenario> {
    Scenario::new(rig.cfg, rig.array, rig.link, targets, tx.clone(), schedule.clone())
}
