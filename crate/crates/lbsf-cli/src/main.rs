//! `lbsf`: one binary for the full pipeline — synthetic data generation,
//! training, evaluation, scoring, attention explanation, and the attention
//! cost benchmark. Logs go to stderr, artifacts to files; every artifact
//! carries the effective configuration and tool version.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "lbsf", version, about = "Merchant-folded long-term payment behavior modeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic JSONL dataset with planted default patterns.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the generator seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the observation span in days (45, 90, or 180).
        #[arg(long, value_parser = ["45", "90", "180"])]
        days: Option<String>,
    },
    /// Train a model on a labeled JSONL dataset and save a checkpoint.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the training seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Data-parallel workers (1 = bitwise-reproducible reference order).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Evaluate a checkpoint on a labeled dataset (AUC, Recall@10%).
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score users with a checkpoint, one JSON object per user.
    Score {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export per-user merchant attention attributions.
    Explain {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Benchmark flat vs folded attention cost; emits CSV.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { config, out, seed, days } => {
            commands::generate(config.as_deref(), &out, seed, days.as_deref())
        }
        Command::Train { config, data, out, seed, workers } => {
            commands::train(config.as_deref(), &data, &out, seed, workers)
        }
        Command::Eval { data, model, out } => commands::eval(&data, &model, out.as_deref()),
        Command::Score { data, model, out } => commands::score(&data, &model, &out),
        Command::Explain { config, data, model, out } => {
            commands::explain(config.as_deref(), &data, &model, &out)
        }
        Command::Bench { config, out, seed } => commands::bench(config.as_deref(), &out, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
