use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::{correlate, estimate, eval, simulate, sweep, vocab};
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "impress",
    version,
    about = "Exemplar-based impression tag estimation toolkit"
)]
struct Cli {
    /// TOML run configuration; command-line flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the canonical tag vocabulary from raw tag records
    Vocab(vocab::Args),
    /// Estimate tags for queries from exemplar scores
    Estimate(estimate::Args),
    /// Macro-averaged precision, recall and F1 of predictions
    Eval(eval::Args),
    /// Grid search over the ensemble parameters
    Sweep(sweep::Args),
    /// Generate a corrupted synthetic corpus and compare both estimators
    Simulate(simulate::Args),
    /// Genre-by-impression correlation matrix and heatmap
    Correlate(correlate::Args),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Vocab(a) => vocab::run(a, &cfg),
        Command::Estimate(a) => estimate::run(a, &cfg),
        Command::Eval(a) => eval::run(a, &cfg),
        Command::Sweep(a) => sweep::run(a, &cfg),
        Command::Simulate(a) => simulate::run(a, &cfg),
        Command::Correlate(a) => correlate::run(a, &cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
