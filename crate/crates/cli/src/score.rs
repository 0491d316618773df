use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use longform_core::io::read_jsonl_lenient;
use longform_core::judge::{resolve_length_spec, Judge, Resolution};
use longform_core::rewards::{RewardParams, RewardStack};
use longform_core::structure::OutputMode;
use longform_core::{LengthSpec, PromptSpec, WordRange};

use crate::common::{prepare_out_dir, Global};

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// JSONL of `{prompt, text}`, optionally with `length_spec`.
    #[arg(long)]
    pub inputs: PathBuf,
    /// Writing reward model checkpoint; overrides the config.
    #[arg(long)]
    pub writing_rm: Option<PathBuf>,
    /// Fallback band when a line has no explicit or judged length.
    #[arg(long)]
    pub lower: Option<u32>,
    #[arg(long)]
    pub upper: Option<u32>,
    #[arg(long)]
    pub length_max: Option<u32>,
    /// `think` or `direct`; overrides the config.
    #[arg(long)]
    pub mode: Option<OutputMode>,
}

#[derive(Debug, Deserialize)]
struct ScoreInput {
    prompt: String,
    text: String,
    #[serde(default)]
    length_spec: Option<LengthSpec>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum ScoreOutput {
    Ok {
        line: usize,
        length: f64,
        write: f64,
        format: f64,
    },
    Err {
        line: usize,
        error: String,
    },
}

fn score_line(
    input: &ScoreInput,
    line: usize,
    rewards: &RewardStack,
    judge: Option<&dyn Judge>,
    default: WordRange,
    cap: u32,
    mode: OutputMode,
) -> longform_core::Result<ScoreOutput> {
    let mut prompt = PromptSpec::new(format!("line-{line}"), input.prompt.clone())?;
    prompt.length_spec = input.length_spec;
    let spec = match resolve_length_spec(&prompt, judge, default, cap)? {
        Resolution::Spec { spec, .. } => spec,
        Resolution::Dropped => {
            return Ok(ScoreOutput::Err {
                line,
                error: "judge found no reasonable length for this prompt".into(),
            })
        }
    };
    let r = rewards.score_text(&input.prompt, &input.text, &spec, mode);
    Ok(ScoreOutput::Ok {
        line,
        length: r.length,
        write: r.write,
        format: r.format,
    })
}

pub fn run(global: &Global, args: &ScoreArgs) -> Result<ExitCode> {
    let mut cfg = global.load_config()?;
    if let Some(p) = &args.writing_rm {
        cfg.writing_rm = Some(p.clone());
    }
    if let Some(l) = args.lower {
        cfg.default_range.lower = l;
    }
    if let Some(u) = args.upper {
        cfg.default_range.upper = u;
    }
    if let Some(m) = args.length_max {
        cfg.length_max = m;
    }
    if let Some(m) = args.mode {
        cfg.prompt_mode = m;
    }
    cfg.validate()?;
    let rewards = RewardStack::standard(&RewardParams {
        format: cfg.format,
        writing_checkpoint: cfg.writing_rm.clone(),
    })?;
    let judge = global.judge()?;

    let lines = read_jsonl_lenient::<ScoreInput>(&args.inputs)?;
    if lines.is_empty() {
        bail!("{} has no input lines", args.inputs.display());
    }
    let outputs: Vec<ScoreOutput> = lines
        .iter()
        .map(|(line, parsed)| {
            let res = match parsed {
                Ok(input) => score_line(
                    input,
                    *line,
                    &rewards,
                    judge.as_deref(),
                    cfg.default_range,
                    cfg.length_max,
                    cfg.prompt_mode,
                ),
                Err(e) => Ok(ScoreOutput::Err {
                    line: *line,
                    error: e.to_string(),
                }),
            };
            res.unwrap_or_else(|e| ScoreOutput::Err {
                line: *line,
                error: e.to_string(),
            })
        })
        .collect();

    let mut sink: Box<dyn Write> = match &global.out {
        Some(dir) => {
            prepare_out_dir(dir)?;
            Box::new(std::io::BufWriter::new(std::fs::File::create(
                dir.join("scores.jsonl"),
            )?))
        }
        None => Box::new(std::io::stdout().lock()),
    };
    for o in &outputs {
        writeln!(sink, "{}", serde_json::to_string(o)?)?;
    }
    sink.flush()?;

    let failed = outputs.iter().filter(|o| matches!(o, ScoreOutput::Err { .. })).count();
    if failed > 0 {
        log::warn!("{failed} of {} line(s) could not be scored", outputs.len());
    }
    if failed == outputs.len() {
        eprintln!("error: no line could be scored");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
