//! Linear writing-quality scorer trained with the Bradley–Terry pairwise loss.
//!
//! The scorer is `w · φ(answer)` over a fixed feature basis. Changing the
//! basis requires bumping [`FEATURE_VERSION`]; checkpoints written against a
//! different version are rejected on load.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::format::{repetition_fraction, FormatPolicy};
use crate::error::{Error, Result};
use crate::text::{paragraph_count, split_sentences, words};

pub const FEATURE_VERSION: &str = "text-features-v1";

pub const FEATURE_NAMES: [&str; 7] = [
    "log_word_count",
    "mean_word_chars",
    "type_token_ratio",
    "log_mean_sentence_words",
    "repetition_fraction",
    "log_paragraph_count",
    "punctuation_diversity",
];

pub const FEATURE_DIM: usize = FEATURE_NAMES.len();

pub fn extract_features(answer: &str) -> [f64; FEATURE_DIM] {
    let ws = words(answer);
    let n = ws.len() as f64;
    let mean_word_chars = if ws.is_empty() {
        0.0
    } else {
        ws.iter().map(|w| w.chars().count() as f64).sum::<f64>() / n
    };
    let ttr = if ws.is_empty() {
        0.0
    } else {
        let distinct: BTreeSet<String> = ws.iter().map(|w| w.to_lowercase()).collect();
        distinct.len() as f64 / n
    };
    let sentences = split_sentences(answer);
    let mean_sentence = if sentences.is_empty() {
        0.0
    } else {
        n / sentences.len() as f64
    };
    let punct: BTreeSet<char> = answer
        .chars()
        .filter(|c| c.is_ascii_punctuation() || matches!(*c, '。' | '，' | '！' | '？' | '；' | '：' | '、'))
        .collect();
    [
        (1.0 + n).ln(),
        mean_word_chars,
        ttr,
        (1.0 + mean_sentence).ln(),
        repetition_fraction(answer, &FormatPolicy::default()),
        (1.0 + f64::from(paragraph_count(answer))).ln(),
        punct.len() as f64 / 8.0,
    ]
}

/// `−log σ(s_w − s_l)`, evaluated without overflow for large margins.
pub fn bt_pair_loss(s_w: f64, s_l: f64) -> f64 {
    let d = s_w - s_l;
    if d >= 0.0 {
        (-d).exp().ln_1p()
    } else {
        -d + d.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
}

impl PreferencePair {
    pub fn new(prompt: impl Into<String>, chosen: impl Into<String>, rejected: impl Into<String>) -> Result<Self> {
        let pair = Self {
            prompt: prompt.into(),
            chosen: chosen.into(),
            rejected: rejected.into(),
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chosen == self.rejected {
            return Err(Error::invariant("pair", "chosen and rejected are identical"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WritingRm {
    pub feature_extractor_version: String,
    pub weights: Vec<f64>,
}

impl Default for WritingRm {
    fn default() -> Self {
        Self::zeros()
    }
}

impl WritingRm {
    pub fn zeros() -> Self {
        Self::from_weights(vec![0.0; FEATURE_DIM]).expect("dimension matches")
    }

    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.len() != FEATURE_DIM {
            return Err(Error::LengthMismatch {
                what: "writing RM weights vs feature basis",
                left: weights.len(),
                right: FEATURE_DIM,
            });
        }
        Ok(Self {
            feature_extractor_version: FEATURE_VERSION.to_string(),
            weights,
        })
    }

    /// The prompt is accepted for interface parity with prompt-aware scorers;
    /// the linear basis only looks at the answer.
    pub fn score(&self, _prompt: &str, answer: &str) -> f64 {
        self.score_features(&extract_features(answer))
    }

    pub fn score_features(&self, phi: &[f64; FEATURE_DIM]) -> f64 {
        self.weights.iter().zip(phi).map(|(w, x)| w * x).sum()
    }

    /// Feature names ordered by absolute weight, largest first.
    pub fn top_features(&self, n: usize) -> Vec<(&'static str, f64)> {
        let mut ranked: Vec<_> = FEATURE_NAMES
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
            .collect();
        ranked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
        ranked.truncate(n);
        ranked
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("serializable");
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let rm: WritingRm = serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        if rm.feature_extractor_version != FEATURE_VERSION {
            return Err(Error::VersionMismatch {
                expected: FEATURE_VERSION.to_string(),
                found: rm.feature_extractor_version,
            });
        }
        Self::from_weights(rm.weights)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for RmTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RmTrainReport {
    pub model: WritingRm,
    /// Mean pairwise loss before training and after each epoch.
    pub losses: Vec<f64>,
}

/// Feature differences `φ(chosen) − φ(rejected)` for each pair.
pub fn pair_deltas(pairs: &[PreferencePair]) -> Vec<[f64; FEATURE_DIM]> {
    pairs
        .iter()
        .map(|p| {
            let (a, b) = (extract_features(&p.chosen), extract_features(&p.rejected));
            std::array::from_fn(|i| a[i] - b[i])
        })
        .collect()
}

fn mean_loss(weights: &[f64], deltas: &[[f64; FEATURE_DIM]]) -> f64 {
    deltas
        .iter()
        .map(|d| {
            let margin: f64 = weights.iter().zip(d).map(|(w, x)| w * x).sum();
            bt_pair_loss(margin, 0.0)
        })
        .sum::<f64>()
        / deltas.len() as f64
}

/// Full-batch gradient descent on the mean Bradley–Terry loss, starting from
/// zero weights. A step that would raise the loss is retried at half the
/// learning rate, so the recorded loss sequence never increases.
pub fn train_writing_rm(pairs: &[PreferencePair], config: &RmTrainConfig) -> Result<RmTrainReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset("no preference pairs".into()));
    }
    let deltas = pair_deltas(pairs);
    train_on_deltas(&deltas, WritingRm::zeros().weights, config)
}

pub(crate) fn train_on_deltas(
    deltas: &[[f64; FEATURE_DIM]],
    init: Vec<f64>,
    config: &RmTrainConfig,
) -> Result<RmTrainReport> {
    let mut weights = init;
    let mut loss = mean_loss(&weights, deltas);
    if !loss.is_finite() {
        return Err(Error::NonFinite("writing RM loss at initialization".into()));
    }
    let mut losses = vec![loss];
    let mut lr = config.learning_rate;
    let n = deltas.len() as f64;

    for _ in 0..config.epochs {
        let mut grad = [0.0; FEATURE_DIM];
        for d in deltas {
            let margin: f64 = weights.iter().zip(d).map(|(w, x)| w * x).sum();
            let coeff = -sigmoid(-margin) / n;
            for (g, x) in grad.iter_mut().zip(d) {
                *g += coeff * x;
            }
        }
        if grad.iter().all(|g| *g == 0.0) {
            losses.push(loss);
            continue;
        }
        loop {
            let candidate: Vec<f64> = weights.iter().zip(&grad).map(|(w, g)| w - lr * g).collect();
            let next = mean_loss(&candidate, deltas);
            if !next.is_finite() || candidate.iter().any(|w| !w.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "writing RM loss (learning rate {lr} too large?)"
                )));
            }
            if next <= loss {
                weights = candidate;
                loss = next;
                break;
            }
            lr *= 0.5;
            if lr < 1e-30 {
                break;
            }
        }
        losses.push(loss);
    }
    Ok(RmTrainReport {
        model: WritingRm::from_weights(weights)?,
        losses,
    })
}

/// Fraction of pairs where the chosen text scores strictly higher.
pub fn pairwise_accuracy(model: &WritingRm, pairs: &[PreferencePair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let correct = pairs
        .iter()
        .filter(|p| model.score(&p.prompt, &p.chosen) > model.score(&p.prompt, &p.rejected))
        .count();
    correct as f64 / pairs.len() as f64
}
