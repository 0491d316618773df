//! Training configuration and its flat `key = value` file format.
//!
//! ```text
//! # comments start with '#'
//! seed = 7
//! group_size = 16
//! prompt_mode = think
//! ```
//!
//! Unspecified keys keep their defaults. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grpo::StdMode;
use crate::rewards::FormatPolicy;
use crate::structure::OutputMode;
use crate::types::{WordRange, DEFAULT_LENGTH_CAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub group_size: usize,
    pub batch_prompts: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub steps: usize,
    pub std_mode: StdMode,
    pub prompt_mode: OutputMode,
    /// Gradient updates per sampled batch. With 1 every update happens at
    /// θ = θ_old and the clip never binds.
    pub inner_updates: usize,
    pub checkpoint_every: usize,
    /// Band used when neither an explicit count nor the judge gives one.
    pub default_range: WordRange,
    pub length_max: u32,
    pub format: FormatPolicy,
    pub policy_init: String,
    pub prompts: Option<PathBuf>,
    pub writing_rm: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            group_size: 32,
            batch_prompts: 32,
            epsilon: 0.2,
            beta: 0.0,
            temperature: 0.8,
            top_p: 1.0,
            max_tokens: 14_000,
            learning_rate: 0.05,
            seed: 0,
            steps: 150,
            std_mode: StdMode::Population,
            prompt_mode: OutputMode::ThinkRequired,
            inner_updates: 1,
            checkpoint_every: 50,
            default_range: WordRange::new(300, 1200),
            length_max: DEFAULT_LENGTH_CAP,
            format: FormatPolicy::default(),
            policy_init: "uniform".to_string(),
            prompts: None,
            writing_rm: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub group_size: Option<usize>,
    pub epsilon: Option<f64>,
    pub beta: Option<f64>,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub max_tokens: Option<usize>,
    pub learning_rate: Option<f64>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::invariant(field, msg));
        if self.group_size < 2 {
            return bad("group_size", format!("must be >= 2, got {}", self.group_size));
        }
        if self.batch_prompts < 1 {
            return bad("batch_prompts", "must be >= 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon", format!("must lie in (0, 1), got {}", self.epsilon));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return bad("beta", format!("must be >= 0, got {}", self.beta));
        }
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return bad("temperature", format!("must be > 0, got {}", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p", format!("must lie in (0, 1], got {}", self.top_p));
        }
        if self.max_tokens < 1 {
            return bad("max_tokens", "must be >= 1".into());
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return bad("learning_rate", format!("must be >= 0, got {}", self.learning_rate));
        }
        if self.inner_updates < 1 {
            return bad("inner_updates", "must be >= 1".into());
        }
        if self.checkpoint_every < 1 {
            return bad("checkpoint_every", "must be >= 1".into());
        }
        self.default_range
            .with_cap(self.length_max)
            .map_err(|e| Error::invariant("length_lower/length_upper/length_max", e.to_string()))?;
        if self.default_range.upper >= self.length_max {
            return bad("length_upper", format!("must be below length_max {}", self.length_max));
        }
        self.format.validate()?;
        Ok(())
    }

    pub fn apply(&mut self, o: &ConfigOverrides) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = o.$field { self.$field = v; }
            )*};
        }
        set!(
            seed,
            steps,
            group_size,
            epsilon,
            beta,
            temperature,
            top_p,
            max_tokens,
            learning_rate
        );
    }

    /// Parses config text; `origin` is used in error locations.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let loc = || format!("{origin}:{}", idx + 1);
            let line = strip_comment(line).trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(loc(), format!("expected `key = value`, got `{line}`")));
            };
            let key = key.trim();
            let value = unquote(value.trim());
            cfg.set(key, value).map_err(|msg| Error::parse(loc(), msg))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("`{key}` expects a number, got `{v}`"))
        }
        match key {
            "group_size" | "G" => self.group_size = num(key, value)?,
            "batch_prompts" => self.batch_prompts = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "temperature" => self.temperature = num(key, value)?,
            "top_p" => self.top_p = num(key, value)?,
            "max_tokens" => self.max_tokens = num(key, value)?,
            "learning_rate" | "lr" => self.learning_rate = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "std_mode" => self.std_mode = value.parse()?,
            "prompt_mode" => self.prompt_mode = value.parse()?,
            "inner_updates" => self.inner_updates = num(key, value)?,
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            "length_lower" => self.default_range.lower = num(key, value)?,
            "length_upper" => self.default_range.upper = num(key, value)?,
            "length_max" => self.length_max = num(key, value)?,
            "shingle_k" => self.format.shingle_k = num(key, value)?,
            "dup_threshold" => self.format.dup_threshold = num(key, value)?,
            "rep_weight" => self.format.rep_weight = num(key, value)?,
            "policy_init" => self.policy_init = value.to_string(),
            "prompts" => self.prompts = Some(PathBuf::from(value)),
            "writing_rm" => self.writing_rm = Some(PathBuf::from(value)),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Renders the config back into the file format. `parse(render())`
    /// reproduces the same config.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("group_size", self.group_size.to_string());
        kv("batch_prompts", self.batch_prompts.to_string());
        kv("epsilon", self.epsilon.to_string());
        kv("beta", self.beta.to_string());
        kv("temperature", self.temperature.to_string());
        kv("top_p", self.top_p.to_string());
        kv("max_tokens", self.max_tokens.to_string());
        kv("learning_rate", self.learning_rate.to_string());
        kv("seed", self.seed.to_string());
        kv("steps", self.steps.to_string());
        kv("std_mode", self.std_mode.as_str().to_string());
        kv(
            "prompt_mode",
            match self.prompt_mode {
                OutputMode::ThinkRequired => "think",
                OutputMode::AnswerOnly => "direct",
            }
            .to_string(),
        );
        kv("inner_updates", self.inner_updates.to_string());
        kv("checkpoint_every", self.checkpoint_every.to_string());
        kv("length_lower", self.default_range.lower.to_string());
        kv("length_upper", self.default_range.upper.to_string());
        kv("length_max", self.length_max.to_string());
        kv("shingle_k", self.format.shingle_k.to_string());
        kv("dup_threshold", self.format.dup_threshold.to_string());
        kv("rep_weight", self.format.rep_weight.to_string());
        kv("policy_init", self.policy_init.clone());
        if let Some(p) = &self.prompts {
            kv("prompts", format!("\"{}\"", p.display()));
        }
        if let Some(p) = &self.writing_rm {
            kv("writing_rm", format!("\"{}\"", p.display()));
        }
        out
    }
}

pub fn load_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TrainConfig::parse(&text, &path.display().to_string())
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}
