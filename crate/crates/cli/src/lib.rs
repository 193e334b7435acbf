//! Command-line front end: TOML configs in, CSV results, fit reports and
//! JSON-lines traces out.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::{FitArgs, FitModel, SimulateArgs, TraceArgs};

#[derive(Debug, Parser)]
#[command(name = "toricsim", version, about = "Local decoders for the 2D and 4D toric codes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte Carlo memory-time experiment for every (L, p) point of a config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads; results do not depend on it.
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit eq1 or eq2 to a results CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FitModel::Auto)]
        model: FitModel,
        /// Bootstrap resamples for the eq2 error bars.
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one trial and write every event to trace.jsonl.
    Trace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Qubit indices flipped before the first cycle, comma separated.
        #[arg(long, value_delimiter = ',')]
        inject: Vec<usize>,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, workers, seed } => {
            commands::simulate(SimulateArgs { config: &config, out: &out, workers, seed })?;
            eprintln!("wrote {}", out.display());
        }
        Command::Fit { input, out, model, bootstrap, seed } => {
            let report = commands::fit(FitArgs { input: &input, out: &out, model, bootstrap, seed })?;
            println!("{}", commands::describe_fit(&report));
        }
        Command::Trace { config, out, seed, trial, inject } => {
            let path = commands::trace(TraceArgs { config: &config, out: &out, seed, trial, inject: &inject })?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}
