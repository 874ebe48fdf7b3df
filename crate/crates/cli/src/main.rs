//! `attn2d`: verification suites, communication sweeps, single-run reports
//! and analytic cost tables for the simulated 2D-parallel attention.
//!
//! Exit status is 0 on success, 1 when a verification check fails and 2 on
//! a configuration error.

mod cost;
mod error;
mod opts;
mod simulate;
mod sweep;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "attn2d", version, about = "Exact distributed attention on a simulated processor grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every strategy against the dense oracle and the ledger predictions.
    Verify(verify::VerifyArgs),
    /// Measure per-processor attention words over a grid of sizes (CSV).
    Sweep(sweep::SweepArgs),
    /// Run one forward and backward pass and print a JSON report.
    Simulate(simulate::SimulateArgs),
    /// Tabulate the analytic communication model (CSV or JSON).
    Cost(cost::CostArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Verify(args) => verify::run(&args),
        Command::Sweep(args) => sweep::run(&args),
        Command::Simulate(args) => simulate::run(&args),
        Command::Cost(args) => cost::run(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("attn2d: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
