//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a checked property fails (coverage,
//! calibration, training divergence), 2 on usage or configuration errors.

mod args;
mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::Error;
pub use args::{BudgetArgs, DataArgs, FiniteSampleArgs, ModelArgs, NoiseArgs, TrainArgs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "privfair", version, about = "Audit linear classifiers released with Gaussian output perturbation")]
pub struct Cli {
    /// Base seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Directory for output files; without it results go to stdout.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Format of tabular results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Smallest noise level meeting an (epsilon, delta) budget.
    Calibrate(commands::CalibrateArgs),
    /// Bounds on norm, disagreement, accuracy and fairness over an epsilon grid.
    Audit(commands::AuditArgs),
    /// Monte Carlo coverage check of every bound.
    Simulate(commands::SimulateArgs),
    /// Posterior of the non-private model given a released private one.
    Posterior(commands::PosteriorArgs),
    /// Stationary law of noisy gradient descent on a quadratic.
    NoisyGd(commands::NoisyGdArgs),
    /// Write a synthetic two-class dataset as CSV.
    GenData(commands::GenDataArgs),
    /// Train the non-private logistic-regression model.
    Train(commands::TrainCmdArgs),
    /// Shuffle-split a CSV file into train and test files.
    Split(commands::SplitArgs),
}

/// Outcome of a command that ran to completion.
pub(crate) enum Outcome {
    Ok,
    CheckFailed(String),
}

pub(crate) fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Calibration(_) | Error::Divergence(_) => EXIT_CHECK_FAILED,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(&cli) {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            EXIT_CHECK_FAILED
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
