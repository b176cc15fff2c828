mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use output::Output;
use std::process::ExitCode;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] iet_core::Error),
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_resource() => 3,
            CliError::Core(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "iet", version, about = "Interval exchanges, Rauzy-Veech/Zorich induction and affine IETs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rauzy class of a permutation.
    RauzyClass(ExperimentConfig),
    /// Zorich orbit: lengths, heights and tiling per block.
    Orbit(ExperimentConfig),
    /// Rauzy path as runs of one move type.
    Path(ExperimentConfig),
    /// Top Lyapunov exponent of the Zorich cocycle by Monte Carlo.
    Lyapunov(ExperimentConfig),
    /// Generic-condition scanner over random rotation-type lengths.
    Scan(ExperimentConfig),
    /// Zero-dimension criterion at scanner hits or given levels.
    Criterion(ExperimentConfig),
    /// Local-dimension trace of the invariant measure of realized AIETs.
    Dimension(ExperimentConfig),
    /// Dynamical partition of a circle map.
    Partition(ExperimentConfig),
    /// Rotation number of a circle map.
    RotationNumber(ExperimentConfig),
    /// Continued fraction expansion.
    Cf(ExperimentConfig),
}

type Runner = fn(&ExperimentConfig) -> Result<Output, CliError>;

impl Command {
    fn split(self) -> (&'static str, ExperimentConfig, Runner) {
        use commands::*;
        match self {
            Command::RauzyClass(c) => ("rauzy-class", c, rauzy_class_cmd),
            Command::Orbit(c) => ("orbit", c, orbit_cmd),
            Command::Path(c) => ("path", c, path_cmd),
            Command::Lyapunov(c) => ("lyapunov", c, lyapunov_cmd),
            Command::Scan(c) => ("scan", c, scan_cmd),
            Command::Criterion(c) => ("criterion", c, criterion_cmd),
            Command::Dimension(c) => ("dimension", c, dimension_cmd),
            Command::Partition(c) => ("partition", c, partition_cmd),
            Command::RotationNumber(c) => ("rotation-number", c, rotation_number_cmd),
            Command::Cf(c) => ("cf", c, cf_cmd),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, cfg, cmd) = cli.command.split();
    let cfg = cfg.resolve()?;
    cfg.validate()?;
    if let Some(j) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let t0 = Instant::now();
    let out = cmd(&cfg)?;
    output::emit(name, &cfg, &out, t0.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
