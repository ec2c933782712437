//! Monte Carlo experiment runners behind the command-line tool: beam
//! synthesis, CFAR calibration, discovery, tracking and bound studies.
//!
//! Every runner is a pure function of the scenario (including its seed) and
//! returns its output files in memory; trials run in parallel but each draws
//! from its own tagged random stream and results are merged in trial order.

mod beams;
mod calibrate;
mod crlb_study;
mod discovery;
mod rig;
mod table;
mod tracking;

use std::path::Path;

use serde::Serialize;

pub use beams::{synth_beams, BeamReport};
pub use calibrate::{calibrate_cfar, null_sample, CalibrationReport, NullSample, VALIDATION_TOLERANCE};
pub use crlb_study::{run_crlb_study, CrlbPoint, CrlbReport};
pub use discovery::{discovery_trial, match_detections, run_discovery, DiscoveryReport, PdPoint, TrialOutcome};
pub use rig::{draw_symbols, receive, sim_scenario, stacked, Rig};
pub use table::{Cell, ResultTable, SCHEMA, VERSION};
pub use tracking::{
    nearest_cell, run_tracking, run_tracking_with, tracking_trial, TrackingReport, TrackingSetup, UserAccuracy, UserError,
};

use crate::error::Result;

/// Named output files, in the order they were produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn add_text(&mut self, name: &str, text: String) {
        self.files.push((name.into(), text));
    }

    pub fn add_table(&mut self, name: &str, table: &ResultTable) {
        self.add_text(name, table.to_csv());
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) {
        self.add_text(name, serde_json::to_string_pretty(value).expect("records serialise") + "\n");
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, t)| t.as_str())
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, text) in &self.files {
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}
