use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bpms::conic::{SolveStatus, SolverSettings};
use bpms::config::ExperimentConfig;
use bpms::par::{configure_workers, Exec};
use bpms::sweep::{
    beampattern_to_dir, parse_rho_grid, parse_schemes, sweep_to_dir, BeampatternRequest,
    SweepRequest,
};
use bpms::Error;

/// Beamforming tradeoffs between bistatic positioning and monostatic sensing.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trace the BP/MS tradeoff for each scheme over a grid of weights.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated scheme names, e.g. FDB-WCRB,APA.
        #[arg(long)]
        schemes: String,
        /// Point count or comma-separated weights.
        #[arg(long, default_value = "21")]
        rho_grid: String,
        #[arg(long)]
        out: PathBuf,
        /// Number of gain-phase realisations to average over.
        #[arg(long, default_value_t = 1)]
        phase_averages: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sample the transmit beampattern of one design.
    Beampattern {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 1.0)]
        step_deg: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> bpms::Result<bool> {
    configure_workers()?;
    let settings = SolverSettings::from_env()?;
    match cli.command {
        Command::Sweep {
            config,
            schemes,
            rho_grid,
            out,
            phase_averages,
            seed,
        } => {
            let schemes = parse_schemes(&schemes)?;
            let rhos = parse_rho_grid(&rho_grid)?;
            if phase_averages == 0 {
                return Err(Error::Config("--phase-averages must be at least 1".into()));
            }
            let cfg = ExperimentConfig::load(&config)?;
            let req = SweepRequest {
                schemes,
                rhos,
                seed: seed.unwrap_or(cfg.seed()),
                phase_averages,
                settings,
                exec: Exec::default(),
            };
            let m = sweep_to_dir(&cfg, &req, &out)?;
            for p in &m.points {
                if p.status == SolveStatus::Failed {
                    log::warn!("{} rho={:?} failed: {}", p.scheme, p.rho, p.details.join(" | "));
                }
            }
            Ok(m.points.iter().all(|p| p.status != SolveStatus::Failed))
        }
        Command::Beampattern {
            config,
            scheme,
            rho,
            step_deg,
            out,
            seed,
        } => {
            let scheme = scheme.parse()?;
            let cfg = ExperimentConfig::load(&config)?;
            let req = BeampatternRequest {
                scheme,
                rho,
                step_deg,
                seed: seed.unwrap_or(cfg.seed()),
                settings,
            };
            let m = beampattern_to_dir(&cfg, &req, &out)?;
            Ok(m.points.iter().all(|p| p.status != SolveStatus::Failed))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e @ (Error::Solver(_) | Error::Unidentifiable { .. } | Error::DegenerateMismatch)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
