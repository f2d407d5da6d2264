//! `satground` command-line driver.
//!
//! Exit codes: 0 success, 1 usage, 2 numerical failure, 3 I/O or parse
//! error, 4 coupling outside the existence regime, 5 failed diagnostics.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use satground::Error;

#[derive(Debug, Parser)]
#[command(name = "satground", version, about = "Ground states of the 2D saturable NLS model")]
struct Cli {
    /// JSON file mirroring the flags; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the existence threshold T0 and its upper-bound certificate.
    Threshold(ThresholdArgs),
    /// Classify a coupling and compute its ground state.
    Solve(SolveArgs),
    /// Classify and solve a list or range of couplings.
    Sweep(SweepArgs),
    /// Check the inequalities, polar invariance and optionally a stored state.
    Verify(VerifyArgs),
    /// Propagate a stored ground state and check that it is stationary.
    Propagate(PropagateArgs),
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    /// Amplitude tolerance of the Townes shooting.
    #[arg(long)]
    tol: Option<f64>,
    /// Comma-separated dilation scales of the trial upper bounds.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Write the estimate as JSON.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FlowArgs {
    /// Radial mesh spacing.
    #[arg(long)]
    spacing: Option<f64>,
    /// Flow stopping tolerance on the Euler–Lagrange residual.
    #[arg(long)]
    residual_tol: Option<f64>,
    /// Comma-separated disk radii.
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<f64>>,
    /// Iteration cap per disk.
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Directory for state.json, profile.csv and report.json.
    #[arg(short, long, value_name = "DIR")]
    output: Option<PathBuf>,
    #[command(flatten)]
    flow: FlowArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Comma-separated couplings.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "gamma_range")]
    gamma: Option<Vec<f64>>,
    /// `a:b:n`, n evenly spaced couplings from a to b.
    #[arg(long, allow_hyphen_values = true, value_parser = config::GammaRange::parse)]
    gamma_range: Option<config::GammaRange>,
    /// CSV destination; standard output when absent.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    #[command(flatten)]
    flow: FlowArgs,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// state.json written by `solve`.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Coupling of the polar-invariance check when no state is given.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Write the report as JSON.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PropagateArgs {
    /// state.json written by `solve`.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Propagation distance.
    #[arg(long)]
    z: Option<f64>,
    #[arg(long)]
    dz: Option<f64>,
    /// Half side of the square box.
    #[arg(long)]
    half_width: Option<f64>,
    /// Grid points per side.
    #[arg(long)]
    m: Option<usize>,
    /// Directory for trace.csv and stationarity.json; defaults to the
    /// directory of the state file.
    #[arg(short, long, value_name = "DIR")]
    output: Option<PathBuf>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub const USAGE: u8 = 1;
    pub const NUMERICAL: u8 = 2;
    pub const IO: u8 = 3;
    pub const DOMAIN: u8 = 4;
    pub const DIAGNOSTICS: u8 = 5;

    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(Self::USAGE, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(Self::IO, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::InvalidArgument(_) => Self::USAGE,
            Error::Domain(_) => Self::DOMAIN,
            Error::Parse(_) | Error::Io(_) => Self::IO,
            Error::NumericalFailure(_)
            | Error::Bracket(_)
            | Error::StepSize(_)
            | Error::Convergence { .. }
            | Error::Resource(_) => Self::NUMERICAL,
        };
        CliError::new(code, err.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SATGROUND_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CliError::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
