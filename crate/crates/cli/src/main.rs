//! `occupation`: closed-form solution, curves, simulation, verification and
//! depth sweeps for the minimum expected occupation time below zero.

mod commands;
mod config;
mod error;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use crate::commands::{Hooks, Outcome};
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    /// Constants and free boundaries as JSON.
    Solve,
    /// Value function and allocations on the configured grid as CSV.
    Curve,
    /// Monte Carlo estimates of each strategy against the closed form as JSON.
    Simulate,
    /// Property suite and grid oracle; exits 1 if any check fails.
    Verify,
    /// Value and allocation across ruin depths as CSV.
    Sweep,
}

#[derive(Debug, Parser)]
#[command(name = "occupation", version, about)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    command: Command,
    /// Scale y0 before verification (fault injection).
    #[arg(long, hide = true)]
    corrupt_y0: Option<f64>,
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = RunConfig::load(&cli.config)?;
    match cli.command {
        Command::Solve => commands::solve(&cfg),
        Command::Curve => commands::curve(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::Verify => commands::verify(
            &cfg,
            Hooks {
                corrupt_y0: cli.corrupt_y0,
            },
        ),
        Command::Sweep => commands::sweep(&cfg),
    }
}

fn emit(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Output(e.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|outcome| {
        emit(&cli, &outcome.text)?;
        Ok(outcome.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            if cli.command == Command::Verify {
                eprintln!("verification failed; see the \"failed\" list in the report");
            } else {
                eprintln!("some Monte Carlo estimates fell outside their allowance; see the report");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
