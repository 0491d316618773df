use std::collections::HashSet;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use longform_core::io::{read_jsonl_lenient, write_jsonl};
use longform_core::rewards::{pairwise_accuracy, train_writing_rm, PreferencePair, RmTrainConfig};
use longform_core::synthetic::synthetic_pairs;

use crate::common::{prepare_out_dir, Global};

#[derive(Args, Debug)]
pub struct RmTrainArgs {
    /// JSONL of `{prompt, chosen, rejected}`.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Where to write the model; defaults to `<out>/writing_rm.json`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Fraction of pairs held out for evaluation.
    #[arg(long, default_value_t = 0.2)]
    pub held_out: f64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
}

/// Loads pairs, failing on the first bad line and dropping exact duplicates.
pub fn load_pairs(path: &std::path::Path) -> Result<Vec<PreferencePair>> {
    let mut pairs = Vec::new();
    for (line, parsed) in read_jsonl_lenient::<PreferencePair>(path)? {
        let pair = parsed?;
        pair.validate()
            .with_context(|| format!("{}:{line}: invalid pair", path.display()))?;
        pairs.push(pair);
    }
    if pairs.is_empty() {
        bail!("{} contains no preference pairs", path.display());
    }
    let mut seen = HashSet::new();
    let before = pairs.len();
    pairs.retain(|p| seen.insert((p.prompt.clone(), p.chosen.clone(), p.rejected.clone())));
    if pairs.len() < before {
        warn!("removed {} duplicate pair(s)", before - pairs.len());
    }
    Ok(pairs)
}

pub fn run(global: &Global, args: &RmTrainArgs) -> Result<ExitCode> {
    if !(0.0..1.0).contains(&args.held_out) {
        bail!("--held-out must lie in [0, 1), got {}", args.held_out);
    }
    let model_path = match (&args.model, &global.out) {
        (Some(m), _) => m.clone(),
        (None, Some(dir)) => {
            prepare_out_dir(dir)?;
            dir.join("writing_rm.json")
        }
        (None, None) => bail!("give --model <path> or --out <dir>"),
    };
    let mut pairs = load_pairs(&args.pairs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(global.seed.unwrap_or(0));
    pairs.shuffle(&mut rng);
    let n_held = ((pairs.len() as f64) * args.held_out).round() as usize;
    let n_held = n_held.min(pairs.len() - 1);
    let (held, train) = pairs.split_at(n_held);

    let defaults = RmTrainConfig::default();
    let config = RmTrainConfig {
        learning_rate: args.learning_rate.unwrap_or(defaults.learning_rate),
        epochs: args.epochs.unwrap_or(defaults.epochs),
    };
    let report = train_writing_rm(train, &config)?;
    report.model.save(&model_path)?;

    println!("pairs: {} train, {} held out", train.len(), held.len());
    println!("train accuracy: {:.4}", pairwise_accuracy(&report.model, train));
    if held.is_empty() {
        println!("held-out accuracy: n/a");
    } else {
        println!("held-out accuracy: {:.4}", pairwise_accuracy(&report.model, held));
    }
    println!("final loss: {:.6}", report.losses.last().copied().unwrap_or(f64::NAN));
    for (name, w) in report.model.top_features(3) {
        println!("  {name}: {w:+.4}");
    }
    println!("model written to {}", model_path.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Output file; defaults to `<out>/pairs.jsonl`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn synth(global: &Global, args: &SynthArgs) -> Result<ExitCode> {
    let path = match (&args.output, &global.out) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => {
            prepare_out_dir(dir)?;
            dir.join("pairs.jsonl")
        }
        (None, None) => bail!("give --output <file> or --out <dir>"),
    };
    write_jsonl(&path, synthetic_pairs(args.n, global.seed.unwrap_or(0)))?;
    println!("wrote {} pairs to {}", args.n, path.display());
    Ok(ExitCode::SUCCESS)
}
