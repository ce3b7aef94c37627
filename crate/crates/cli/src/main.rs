//! `ssc`: builds adaptive simplex stochastic collocation surrogates, runs
//! convergence studies and computes statistics, writing CSV for plotting.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure.

mod commands;
mod model_file;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ssc", version, about = "Adaptive simplex stochastic collocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build one surrogate; writes build_log.csv and model.ssc
    Build(settings::ModelArgs),
    /// Measure the true l1 error along adaptive builds; writes converge.csv and slopes.csv
    Converge(commands::ConvergeArgs),
    /// Expectation, variance and CDF of a saved model; writes stats.csv, cdf.csv and comparison.csv
    Stats(commands::StatsArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Build(args) => commands::build(args),
        Command::Converge(args) => commands::converge(args),
        Command::Stats(args) => commands::stats(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
