//! Command-line front end for the experiment runners.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use otfs_radar::experiment::{calibrate_cfar, run_crlb_study, run_discovery, run_tracking, synth_beams, Rig};
use otfs_radar::scenario::{Profile, ScenarioFile};
use otfs_radar::RadarError;

#[derive(Parser)]
#[command(name = "otfs-radar", version, about = "Beam-space OTFS radar experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise the transmit beam, codebook and schedules; write patterns and the manifest.
    SynthBeams(Common),
    /// Calibrate the CFAR scale on noise-only runs and write it back into the scenario file.
    CalibrateCfar {
        #[command(flatten)]
        common: Common,
        /// Target average false-alarm rate; defaults to the scenario's value.
        #[arg(long)]
        pfa: Option<f64>,
    },
    /// Detection probability versus range and number of blocks.
    Discover(Common),
    /// Parameter RMSE of tracked users next to their bounds.
    Track(Common),
    /// Bounds versus SNR and blocks for each receive strategy.
    Crlb(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON). Without it the profile defaults are used.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    profile: Option<Profile>,
}

impl Common {
    fn load(&self) -> Result<ScenarioFile, RadarError> {
        let mut sc = match &self.scenario {
            Some(p) => ScenarioFile::load(p)?,
            None => ScenarioFile::for_profile(self.profile.unwrap_or_default()),
        };
        if let Some(p) = self.profile {
            sc.profile = p;
        }
        if let Some(s) = self.seed {
            sc.seed = s;
        }
        if let Some(t) = self.trials {
            sc.trials = t;
        }
        sc.validate()?;
        if sc.otfs_config().nm() > 1024 {
            eprintln!("warning: {} delay-Doppler bins per block; Monte Carlo runs at this size take hours", sc.otfs_config().nm());
        }
        Ok(sc)
    }
}

fn run(cli: Cli) -> Result<(), RadarError> {
    match cli.command {
        Command::SynthBeams(c) => {
            let rig = Rig::new(&c.load()?)?;
            let r = synth_beams(&rig)?;
            r.artifacts.write_to(&c.out)?;
            println!(
                "tx beam: ripple {:.2} dB, sidelobes {:.2} dB; {} codebook atoms",
                r.tx_quality.ripple_db, r.tx_quality.sll_db, r.atom_count
            );
        }
        Command::CalibrateCfar { common: c, pfa } => {
            let sc = c.load()?;
            let target = pfa.unwrap_or(sc.cfar.target_pfa);
            let rig = Rig::new(&sc)?;
            let r = calibrate_cfar(&rig, target)?;
            r.artifacts.write_to(&c.out)?;
            if let Some(path) = &c.scenario {
                r.scenario.save(path)?;
            }
            println!(
                "alpha = {:.6} (kappa {}), validation false-alarm rate {:.5} over {} cells",
                r.alpha, r.kappa, r.validation_pfa, r.validation_cells
            );
        }
        Command::Discover(c) => {
            let rig = Rig::new(&c.load()?)?;
            let r = run_discovery(&rig)?;
            r.artifacts.write_to(&c.out)?;
            for p in &r.points {
                println!("range {:>6.1} m  B={}  P_d = {:.3}", p.range_m, p.blocks, p.pd);
            }
        }
        Command::Track(c) => {
            let rig = Rig::new(&c.load()?)?;
            let r = run_tracking(&rig)?;
            r.artifacts.write_to(&c.out)?;
            for a in &r.accuracy {
                let x = a.excess_db();
                println!("user {}: MSE/CRLB phi {:+.2} dB, tau {:+.2} dB, nu {:+.2} dB", a.user, x[0], x[1], x[2]);
            }
        }
        Command::Crlb(c) => {
            let rig = Rig::new(&c.load()?)?;
            let r = run_crlb_study(&rig)?;
            r.artifacts.write_to(&c.out)?;
            println!("{} bound rows written", r.points.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                RadarError::Scenario { .. } | RadarError::Config(_) | RadarError::Domain(_) => 2,
                RadarError::Calibration(_) => 3,
                _ => 1,
            })
        }
    }
}
