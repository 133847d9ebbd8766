//! Experiment runner: parses flat key=value configs with sections, executes
//! a named experiment, and persists a manifest, a results CSV, and plot
//! data. Exit codes: 0 success, 2 validation error, 3 numeric degeneracy.

mod config;
mod experiments;
mod plot;

use clap::{Parser, Subcommand};
use mixlab::MixError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mixlab", version, about = "Correlation-decay and coupling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config sample count.
        #[arg(long)]
        samples: Option<u64>,
        /// Worker threads (0 = library default); must not change outputs.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (default: runs/<experiment>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the exact-identity suite and print one row per identity.
    Verify,
    /// Project a results file into two-column plot data.
    Plotdata {
        results: PathBuf,
        /// One of: decay, et, density, scheduler.
        kind: String,
        /// Output file (default: <results stem>.<kind>.plot).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_for(err: &CliError) -> ExitCode {
    match err {
        CliError::Validation(_) => ExitCode::from(2),
        CliError::Numeric(_) => ExitCode::from(3),
    }
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numeric(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric degeneracy: {m}"),
        }
    }
}

impl From<MixError> for CliError {
    fn from(e: MixError) -> Self {
        match e {
            MixError::InvalidInput(m) => CliError::Validation(m),
            MixError::NumericDegeneracy(m) => CliError::Numeric(m),
            MixError::BudgetExceeded(m) => CliError::Numeric(m),
            MixError::DegenerateTuple(m) => CliError::Numeric(m),
            MixError::InsufficientData(m) => CliError::Numeric(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("io: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, samples, threads, out } => {
            experiments::run(&config, seed, samples, threads, out)
        }
        Command::Verify => experiments::verify(),
        Command::Plotdata { results, kind, out } => plot::emit(&results, &kind, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            exit_for(&e)
        }
    }
}
