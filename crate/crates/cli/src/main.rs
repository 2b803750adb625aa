use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod report;
mod run_dir;

#[derive(Parser)]
#[command(name = "psc", version, about = "Principal subspace classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split, standardize and sample one chain per k into a run directory.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides both the split seed and the sampler seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Fit this single k instead of the configured grid.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Score each fitted k on the held-out split and pick one.
    SelectK {
        #[arg(long)]
        out: PathBuf,
    },
    /// Posterior-predictive class probabilities.
    Predict {
        #[arg(long)]
        out: PathBuf,
        /// Chain to use; defaults to the selected k.
        #[arg(long)]
        k: Option<usize>,
        /// CSV of raw features with a header; defaults to the test split.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Defaults to predictions.csv in the run directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Point estimate of the subspace and feature importance.
    Estimate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Nearest-neighbour and Gaussian-mixture baselines on the same split.
    Baseline {
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a run into report.txt.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// fit, select-k, estimate, baseline, predict and report in one go.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Simulate a labelled dataset from a known subspace model.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Fit { config, out, seed, k } => commands::fit(&config, &out, seed, k),
        Command::SelectK { out } => commands::select(&out),
        Command::Predict { out, k, input, output } => commands::predict(&out, k, input.as_deref(), output.as_deref()),
        Command::Estimate { out, k } => commands::estimate(&out, k),
        Command::Baseline { out } => commands::baseline(&out),
        Command::Report { out } => commands::report(&out),
        Command::Run { config, out, seed, k } => commands::run_all(&config, &out, seed, k),
        Command::Synth { config, out, seed } => commands::synth(&config, &out, seed),
    }
}
