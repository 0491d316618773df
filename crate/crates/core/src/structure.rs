//! The `<think>…</think><answer>…</answer>` output grammar.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";
pub const ANSWER_OPEN: &str = "<answer>";
pub const ANSWER_CLOSE: &str = "</answer>";

/// Which prompting style the output is expected to follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputMode {
    /// Think prompt: a think segment is mandatory.
    #[default]
    ThinkRequired,
    /// Direct-answer prompt: a lone answer segment is accepted.
    AnswerOnly,
}

impl std::str::FromStr for OutputMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "think" | "think-required" => Ok(Self::ThinkRequired),
            "direct" | "answer-only" => Ok(Self::AnswerOnly),
            other => Err(format!("unknown output mode `{other}` (expected think or direct)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuredOutput {
    pub think: String,
    pub answer: String,
}

impl StructuredOutput {
    /// Canonical rendering; parsing it back yields `self`.
    pub fn render(&self, mode: OutputMode) -> String {
        if mode == OutputMode::AnswerOnly && self.think.is_empty() {
            format!("{ANSWER_OPEN}{}{ANSWER_CLOSE}", self.answer)
        } else {
            format!(
                "{THINK_OPEN}{}{THINK_CLOSE}\n{ANSWER_OPEN}{}{ANSWER_CLOSE}",
                self.think, self.answer
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureFailure {
    #[error("missing tag")]
    MissingTag,
    #[error("duplicate tag")]
    DuplicateTag,
    #[error("tags out of order")]
    WrongOrder,
    /// Non-whitespace text outside the tagged segments, leading or trailing.
    #[error("content outside tagged segments")]
    TrailingContent,
}

fn find_unique(raw: &str, tag: &str) -> Result<Option<usize>, StructureFailure> {
    let mut hits = raw.match_indices(tag).map(|(i, _)| i);
    let first = hits.next();
    if hits.next().is_some() {
        return Err(StructureFailure::DuplicateTag);
    }
    Ok(first)
}

pub fn parse_structured_output(raw: &str, mode: OutputMode) -> Result<StructuredOutput, StructureFailure> {
    let think_open = find_unique(raw, THINK_OPEN)?;
    let think_close = find_unique(raw, THINK_CLOSE)?;
    let answer_open = find_unique(raw, ANSWER_OPEN)?;
    let answer_close = find_unique(raw, ANSWER_CLOSE)?;

    let (Some(a_open), Some(a_close)) = (answer_open, answer_close) else {
        return Err(StructureFailure::MissingTag);
    };

    let think = match (think_open, think_close) {
        (Some(t_open), Some(t_close)) => Some((t_open, t_close)),
        (None, None) if mode == OutputMode::AnswerOnly => None,
        _ => return Err(StructureFailure::MissingTag),
    };

    let mut boundaries = Vec::with_capacity(4);
    if let Some((t_open, t_close)) = think {
        boundaries.push((t_open, THINK_OPEN.len()));
        boundaries.push((t_close, THINK_CLOSE.len()));
    }
    boundaries.push((a_open, ANSWER_OPEN.len()));
    boundaries.push((a_close, ANSWER_CLOSE.len()));

    if boundaries.windows(2).any(|w| w[0].0 + w[0].1 > w[1].0) {
        return Err(StructureFailure::WrongOrder);
    }

    let first = boundaries[0].0;
    let (last, last_len) = boundaries[boundaries.len() - 1];
    let outside_ok = raw[..first].trim().is_empty() && raw[last + last_len..].trim().is_empty();
    let gap_ok = match think {
        Some((_, t_close)) => raw[t_close + THINK_CLOSE.len()..a_open].trim().is_empty(),
        None => true,
    };
    if !outside_ok || !gap_ok {
        return Err(StructureFailure::TrailingContent);
    }

    let think_text = think
        .map(|(o, c)| raw[o + THINK_OPEN.len()..c].to_string())
        .unwrap_or_default();
    Ok(StructuredOutput {
        think: think_text,
        answer: raw[a_open + ANSWER_OPEN.len()..a_close].to_string(),
    })
}
