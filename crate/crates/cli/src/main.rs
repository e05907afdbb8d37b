//! `prc`: run reservoir computing pipelines from a config file, generate
//! target signals and synthetic datasets, and report reservoir metrics.
//!
//! Exit codes: 0 on success, 1 for invalid configuration or flags, 2 when
//! data cannot be loaded or processed.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{SimulateArgs, TargetArgs};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "prc", version, about = "Physical reservoir computing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train and evaluate a readout as described by a config file.
    Run {
        config: PathBuf,
        /// Directory for results.json, train.csv, test.csv and weights.csv.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write a target signal, one value per line.
    Targets(TargetArgs),
    /// Generate a synthetic dataset of scan files.
    Simulate(SimulateArgs),
    /// Report nonlinearity and linear memory capacity as JSON.
    Metrics {
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, out } => {
            let doc = commands::run(&config, &out)?;
            eprintln!(
                "train error {}, test error {}",
                doc["train_error"], doc["test_error"]
            );
            Ok(())
        }
        Command::Targets(a) => commands::targets(&a),
        Command::Simulate(a) => {
            let (rows, cols) = commands::simulate(&a)?;
            eprintln!("wrote {rows} scans of {cols} readouts to {}", a.out.display());
            Ok(())
        }
        Command::Metrics { config, out } => {
            let report = commands::metrics(&config)?;
            commands::write_json(&report, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
