//! `longform`: train, rm-train, score and arena commands.

mod arena;
mod common;
mod rm;
mod score;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "longform",
    version,
    about = "GRPO training and pairwise evaluation for length-controlled writing"
)]
struct Cli {
    /// Training config file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `mock:<script.jsonl>`, `live` or `rules`.
    #[arg(long, global = true)]
    judge: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run GRPO on the toy policy.
    Train(train::TrainArgs),
    /// Fit the writing reward model on preference pairs.
    RmTrain(rm::RmTrainArgs),
    /// Score `{prompt, text}` lines on the three reward channels.
    Score(score::ScoreArgs),
    /// Judge a candidate against baselines and fit ratings.
    Arena(arena::ArenaArgs),
    /// Write synthetic preference pairs labelled by a hidden scorer.
    SynthPairs(rm::SynthArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let global = common::Global {
        config: cli.config,
        seed: cli.seed,
        judge: cli.judge,
        out: cli.out,
    };
    let result = match &cli.command {
        Command::Train(a) => train::run(&global, a),
        Command::RmTrain(a) => rm::run(&global, a),
        Command::Score(a) => score::run(&global, a),
        Command::Arena(a) => arena::run(&global, a),
        Command::SynthPairs(a) => rm::synth(&global, a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
