//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure while writing outputs, 2 invalid
//! input (unreadable or malformed scenario, bad arguments), 3 a configured
//! check failed.

mod commands;
mod scenario;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use commands::{
    cmd_decohere, cmd_equivalence, cmd_simulate, histogram_csv, outcomes_csv, simulate_with,
    write_atomic, CheckResult, DecoherenceRow, DecoherenceSweep, EquivalenceArgs, RunOptions,
    SimulationOutput,
};
pub use scenario::{Check, MeterSection, OutputSection, Scenario, SweepSection, SCENARIO_SCHEMA};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("check failed: {}", .0.join("; "))]
    CheckFailed(Vec<String>),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::CheckFailed(_) => 3,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "gm", version, about = "Projective-measurement simulator")]
pub struct Cli {
    /// Overrides the scenario's base seed. Falls back to GM_SEED.
    #[arg(long, global = true, env = "GM_SEED")]
    pub seed: Option<u64>,

    /// Directory that relative output paths resolve against.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the ensemble pipeline and write the JSON report and CSV histogram.
    Simulate { scenario: PathBuf },
    /// Sweep the interaction time and tabulate off-diagonal suppression.
    Decohere { scenario: PathBuf },
    /// Test global-phase equivalence of one meter state under two gauge events.
    Equivalence {
        /// Comma-separated amplitudes, each `re` or `re:im`; normalized on input.
        #[arg(long, allow_hyphen_values = true)]
        psi: String,
        /// Displacement of the first event.
        #[arg(long, allow_negative_numbers = true)]
        e1: f64,
        /// Displacement of the second event.
        #[arg(long, allow_negative_numbers = true)]
        e2: f64,
        /// Comma-separated meter eigenvalues; defaults to 0, 1, 2, …
        #[arg(long, allow_hyphen_values = true)]
        eigenvalues: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        hbar: f64,
        #[arg(long, default_value_t = crate::eventreading::DEFAULT_EQUIVALENCE_TOL)]
        tol: f64,
    },
}

/// Executes a parsed command line, printing to stdout/stderr, and returns
/// the process exit code.
pub fn run(cli: Cli) -> i32 {
    let opts = RunOptions {
        seed: cli.seed,
        out: cli.out,
    };
    let result = match cli.command {
        Command::Simulate { scenario } => cmd_simulate(&scenario, &opts).map(|out| {
            for path in &out.written {
                println!("wrote {}", path.display());
            }
            let r = &out.report;
            println!(
                "stage: {:?}, refused: {}/{}, chi_square: {}",
                r.stage,
                r.refused,
                r.n_copies,
                r.chi_square.map_or("n/a".into(), |c| format!("{c:.4}"))
            );
        }),
        Command::Decohere { scenario } => cmd_decohere(&scenario, &opts).map(|sweep| {
            println!("wrote {}", sweep.path.display());
            println!("{} rows", sweep.rows.len());
        }),
        Command::Equivalence {
            psi,
            e1,
            e2,
            eigenvalues,
            hbar,
            tol,
        } => cmd_equivalence(&EquivalenceArgs {
            psi,
            e1,
            e2,
            eigenvalues,
            hbar,
            tol,
        })
        .map(|(_, line)| println!("{line}")),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
