//! `srm`: replica predictions, sweeps and Monte Carlo checks for regression
//! on AR(1) time series.
//!
//! Exit codes: 0 success, 1 configuration error, 2 solver non-convergence
//! (or a failed self-test), 3 simulation failure.

mod commands;
mod config;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigFile, ReproduceArgs, SimulateArgs, SolveArgs, SweepArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("simulation failed: {0}")]
    Simulation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::NonConvergence(_) => 2,
            CliError::Simulation(_) => 3,
        }
    }
}

impl From<srm::Error> for CliError {
    fn from(e: srm::Error) -> Self {
        match e {
            srm::Error::LinearAlgebra(_) => CliError::Simulation(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "srm",
    version,
    about = "Replica MMSE predictions for regression on AR(1) time series"
)]
struct Cli {
    /// TOML file with one section per command, or a CSV written by `srm`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, env = "SRM_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Worker threads for sweeps and Monte Carlo trials.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the fixed-point equations for one problem.
    Solve(SolveArgs),
    /// Predictions over a grid of `c` or `1/sigma2`.
    Sweep(SweepArgs),
    /// VAMP (and the exact posterior for Gaussian priors) against theory.
    Simulate(SimulateArgs),
    /// Regenerate one of the reference figures as CSV and SVG.
    Reproduce(ReproduceArgs),
    /// Run the built-in oracle checks.
    Selftest,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let out_dir = cli.output_dir.as_deref();
    let work = || match cli.command {
        Command::Solve(a) => commands::solve(a.merge(file.solve)),
        Command::Sweep(a) => commands::sweep(a.merge(file.sweep), out_dir),
        Command::Simulate(a) => commands::simulate(a.merge(file.simulate), out_dir),
        Command::Reproduce(a) => commands::reproduce(a.merge(file.reproduce), out_dir),
        Command::Selftest => selftest::run(),
    };
    match cli.jobs {
        Some(0) => Err(CliError::Config("`jobs` must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {n} workers: {e}")))?
            .install(work),
        None => work(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("srm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
