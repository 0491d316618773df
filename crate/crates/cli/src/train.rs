use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use log::{info, warn};
use serde::Serialize;
use sha2::{Digest, Sha256};

use longform_core::grpo::{select_batch, train_step, StepMetrics};
use longform_core::io::{append_jsonl, read_json, read_jsonl, write_json};
use longform_core::judge::resolve_all;
use longform_core::policy::{policy_init_registry, PolicyInitParams, ToyPolicy};
use longform_core::rewards::{RewardParams, RewardStack};
use longform_core::types::check_unique_ids;
use longform_core::{ConfigOverrides, Error, PromptSpec, TrainConfig};

use crate::common::{prepare_out_dir, timestamp, Global};

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub steps: Option<usize>,
    /// Prompt file; overrides `prompts` in the config.
    #[arg(long)]
    pub prompts: Option<std::path::PathBuf>,
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub top_p: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    /// Replace an existing run in the output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub code_version: String,
    pub config: TrainConfig,
    pub judge: Option<String>,
    pub prompts: Option<usize>,
    pub status: String,
    pub steps_completed: usize,
    pub started_at: String,
    pub finished_at: Option<String>,
}

fn run_id(cfg: &TrainConfig, judge: Option<&str>) -> String {
    let mut h = Sha256::new();
    h.update(cfg.render());
    h.update(judge.unwrap_or(""));
    hex::encode(&h.finalize()[..8])
}

fn checkpoint_path(out: &Path, completed: usize) -> std::path::PathBuf {
    out.join("checkpoints").join(format!("step_{completed:06}.json"))
}

pub fn run(global: &Global, args: &TrainArgs) -> Result<ExitCode> {
    let mut cfg = global.load_config()?;
    cfg.apply(&ConfigOverrides {
        seed: global.seed,
        steps: args.steps,
        group_size: args.group_size,
        epsilon: args.epsilon,
        beta: args.beta,
        temperature: args.temperature,
        top_p: args.top_p,
        max_tokens: args.max_tokens,
        learning_rate: args.learning_rate,
    });
    if let Some(p) = &args.prompts {
        cfg.prompts = Some(p.clone());
    }
    cfg.validate().context("invalid config")?;
    let Some(prompt_path) = cfg.prompts.clone() else {
        bail!("no prompt set: give `prompts = <file>` in the config or --prompts");
    };

    let out = global.require_out("train")?;
    prepare_out_dir(out)?;
    let manifest_path = out.join("manifest.json");
    if manifest_path.exists() && !args.force {
        let old: Result<RunManifest, _> = read_json(&manifest_path);
        let id = old.map(|m| m.run_id).unwrap_or_else(|_| "?".into());
        bail!("{} already holds run {id}; pass --force to replace it", out.display());
    }
    std::fs::create_dir_all(out.join("checkpoints")).context("cannot create checkpoint directory")?;

    let mut manifest = RunManifest {
        run_id: run_id(&cfg, global.judge.as_deref()),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        judge: global.judge.clone(),
        prompts: None,
        status: "running".into(),
        steps_completed: 0,
        started_at: timestamp(),
        finished_at: None,
    };
    write_json(&manifest_path, &manifest)?;

    let prompts: Vec<PromptSpec> = read_jsonl(&prompt_path)?;
    if prompts.is_empty() {
        bail!("prompt file {} is empty", prompt_path.display());
    }
    check_unique_ids(&prompts)?;
    let judge = global.judge()?;
    let prompts = resolve_all(prompts, judge.as_deref(), cfg.default_range, cfg.length_max)?;
    if prompts.is_empty() {
        bail!("every prompt was dropped as unfulfillable");
    }
    manifest.prompts = Some(prompts.len());

    let rewards = RewardStack::standard(&RewardParams {
        format: cfg.format,
        writing_checkpoint: cfg.writing_rm.clone(),
    })?;
    let mut policy = policy_init_registry().create(&cfg.policy_init, &PolicyInitParams::default())?;
    let reference = policy.clone();
    policy.save(&checkpoint_path(out, 0))?;

    let log_path = out.join("train_log.jsonl");
    let mut log: Option<BufWriter<File>> = None;
    let mut last: Option<StepMetrics> = None;

    for step in 0..cfg.steps {
        let batch = select_batch(&prompts, step as u64, cfg.batch_prompts);
        let metrics = match train_step(&mut policy, &reference, &batch, &rewards, &cfg, step as u64) {
            Ok(m) if m.objective.is_finite() => m,
            Ok(_) | Err(Error::NonFinite(_)) => {
                if let Some(w) = log.as_mut() {
                    w.flush()?;
                }
                return diverged(out, &policy, &mut manifest, step);
            }
            Err(e) => return Err(e.into()),
        };
        let w = match log.as_mut() {
            Some(w) => w,
            None => log.insert(BufWriter::new(
                File::create(&log_path).with_context(|| format!("cannot create {}", log_path.display()))?,
            )),
        };
        append_jsonl(w, &metrics)?;
        manifest.steps_completed = step + 1;
        if (step + 1) % cfg.checkpoint_every == 0 || step + 1 == cfg.steps {
            policy.save(&checkpoint_path(out, step + 1))?;
        }
        if (step + 1) % 50 == 0 {
            info!(
                "step {}: length {:.3} format {:.3} compliance {:.3}",
                step + 1,
                metrics.length_rm_mean,
                metrics.format_rm_mean,
                metrics.format_compliance_rate
            );
        }
        last = Some(metrics);
    }
    if let Some(w) = log.as_mut() {
        w.flush()?;
    }

    manifest.status = "completed".into();
    manifest.finished_at = Some(timestamp());
    write_json(&manifest_path, &manifest)?;
    match last {
        Some(m) => println!(
            "run {}: {} steps; final length reward {:.3}, format reward {:.3}, compliance {:.3}",
            manifest.run_id, manifest.steps_completed, m.length_rm_mean, m.format_rm_mean, m.format_compliance_rate
        ),
        None => println!(
            "run {}: 0 steps; wrote manifest and initial checkpoint",
            manifest.run_id
        ),
    }
    Ok(ExitCode::SUCCESS)
}

fn diverged(out: &Path, policy: &ToyPolicy, manifest: &mut RunManifest, step: usize) -> Result<ExitCode> {
    let keep = out.join("checkpoints").join("last_good.json");
    policy.save(&keep)?;
    manifest.status = "diverged".into();
    manifest.finished_at = Some(timestamp());
    write_json(&out.join("manifest.json"), manifest)?;
    warn!(
        "numerical divergence at step {step}; last good policy kept at {}",
        keep.display()
    );
    eprintln!("error: training diverged at step {step}");
    Ok(ExitCode::from(2))
}
