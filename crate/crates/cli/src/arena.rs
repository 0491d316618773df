use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use log::warn;
use serde::Serialize;

use longform_core::arena::{
    estimator_registry, leaderboard, outcome_games, output_table, pair_outcomes, run_arena, win_rate_report,
    ArenaPrompt, EstimatorParams, ModelOutput, Rating, WinRateRow, DEFAULT_ANCHOR,
};
use longform_core::io::{read_jsonl, write_json, write_jsonl};

use crate::common::{prepare_out_dir, Global};

#[derive(Args, Debug)]
pub struct ArenaArgs {
    /// JSONL of `{id, prompt}`.
    #[arg(long)]
    pub prompts: PathBuf,
    /// Candidate outputs as `NAME=PATH` or `PATH` (name taken from the file stem).
    #[arg(long)]
    pub candidate: String,
    /// Baseline outputs, same form; repeat for several baselines.
    #[arg(long = "baseline", required = true)]
    pub baselines: Vec<String>,
    /// `bt-mle` or `online-elo`.
    #[arg(long, default_value = "bt-mle")]
    pub estimator: String,
    /// Mean rating of the baselines.
    #[arg(long, default_value_t = DEFAULT_ANCHOR)]
    pub anchor: f64,
}

#[derive(Debug, Serialize)]
struct ArenaReport {
    candidate: String,
    estimator: String,
    judgments: usize,
    failed_judgments: usize,
    rows: Vec<WinRateRow>,
    overall: Option<WinRateRow>,
}

fn model_arg(arg: &str) -> Result<(String, PathBuf)> {
    if let Some((name, path)) = arg.split_once('=') {
        if name.is_empty() {
            bail!("empty model name in `{arg}`");
        }
        return Ok((name.to_string(), PathBuf::from(path)));
    }
    let path = PathBuf::from(arg);
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| anyhow!("cannot derive a model name from `{arg}`; use NAME=PATH"))?;
    Ok((name.to_string(), path))
}

fn load_outputs(name: &str, path: &Path) -> Result<Vec<ModelOutput>> {
    let mut rows: Vec<ModelOutput> =
        read_jsonl(path).with_context(|| format!("cannot load outputs for model `{name}`"))?;
    let mut relabelled = 0;
    for r in &mut rows {
        if r.model != name {
            r.model = name.to_string();
            relabelled += 1;
        }
    }
    if relabelled > 0 {
        warn!(
            "{relabelled} line(s) in {} relabelled as model `{name}`",
            path.display()
        );
    }
    Ok(rows)
}

pub fn run(global: &Global, args: &ArenaArgs) -> Result<ExitCode> {
    let out = global.require_out("arena")?;
    let estimator = estimator_registry().create(&args.estimator, &EstimatorParams::default())?;
    let (candidate, cand_path) = model_arg(&args.candidate)?;
    let mut outputs = load_outputs(&candidate, &cand_path)?;
    let mut baselines = Vec::new();
    for b in &args.baselines {
        let (name, path) = model_arg(b)?;
        if name == candidate || baselines.contains(&name) {
            bail!("model name `{name}` is used twice");
        }
        outputs.extend(load_outputs(&name, &path)?);
        baselines.push(name);
    }
    let prompts: Vec<ArenaPrompt> = read_jsonl(&args.prompts)?;
    if prompts.is_empty() {
        bail!("{} has no prompts", args.prompts.display());
    }
    let table = output_table(&outputs)?;
    let judge = global.require_judge()?;
    prepare_out_dir(out)?;

    let records = run_arena(&prompts, &candidate, &baselines, &table, judge.as_ref())?;
    write_jsonl(&out.join("records.jsonl"), &records)?;
    let failed = records.iter().filter(|r| r.is_error()).count();

    let outcomes = pair_outcomes(&records);
    let games = outcome_games(&outcomes);
    let ratings: Vec<Rating> = if games.is_empty() {
        Vec::new()
    } else {
        leaderboard(estimator.fit(&games, &baselines, args.anchor)?)
    };
    write_json(&out.join("leaderboard.json"), &ratings)?;
    let wr = win_rate_report(&outcomes);
    let report = ArenaReport {
        candidate: candidate.clone(),
        estimator: estimator.name().to_string(),
        judgments: records.len(),
        failed_judgments: failed,
        rows: wr.rows,
        overall: wr.overall,
    };
    write_json(&out.join("report.json"), &report)?;

    for r in &ratings {
        println!("{:<24} {:>8.1}  ({} games)", r.model, r.elo, r.games);
    }
    if let Some(o) = &report.overall {
        println!(
            "{candidate} overall win rate {:.3} ({}W/{}T/{}L)",
            o.win_rate, o.wins, o.ties, o.losses
        );
    }
    if failed * 2 > records.len() {
        eprintln!("error: {failed} of {} judgments failed", records.len());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}
