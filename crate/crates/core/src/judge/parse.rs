use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::JudgeError;
use crate::types::WordRange;

/// Five-level pairwise verdict, from A's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "A_much_better")]
    AMuchBetter,
    #[serde(rename = "A_better")]
    ABetter,
    #[serde(rename = "tie")]
    Tie,
    #[serde(rename = "B_better")]
    BBetter,
    #[serde(rename = "B_much_better")]
    BMuchBetter,
}

impl Verdict {
    pub const ALL: [Verdict; 5] = [
        Verdict::AMuchBetter,
        Verdict::ABetter,
        Verdict::Tie,
        Verdict::BBetter,
        Verdict::BMuchBetter,
    ];

    /// The bracketed marker a judge emits, e.g. `[[A>>B]]`.
    pub fn marker(&self) -> &'static str {
        match self {
            Verdict::AMuchBetter => "[[A>>B]]",
            Verdict::ABetter => "[[A>B]]",
            Verdict::Tie => "[[A=B]]",
            Verdict::BBetter => "[[B>A]]",
            Verdict::BMuchBetter => "[[B>>A]]",
        }
    }

    /// Score for the response shown as A: 1, 0.5 or 0.
    pub fn score_a(&self) -> f64 {
        match self {
            Verdict::AMuchBetter | Verdict::ABetter => 1.0,
            Verdict::Tie => 0.5,
            Verdict::BBetter | Verdict::BMuchBetter => 0.0,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.marker())
    }
}

fn verdict_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[\[(A>>B|A>B|A=B|B>A|B>>A)\]\]").unwrap())
}

/// The verdict named by the last bracketed marker in `text`.
pub fn parse_verdict(text: &str) -> Result<Verdict, JudgeError> {
    let last = verdict_re()
        .captures_iter(text)
        .last()
        .ok_or_else(|| JudgeError::Unparseable {
            reason: "no verdict marker".into(),
            raw: text.to_string(),
        })?;
    Ok(match &last[1] {
        "A>>B" => Verdict::AMuchBetter,
        "A>B" => Verdict::ABetter,
        "A=B" => Verdict::Tie,
        "B>A" => Verdict::BBetter,
        _ => Verdict::BMuchBetter,
    })
}

fn range_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"\{\s*"range"\s*:\s*\[\s*(\d+)\s*,\s*(\d+)\s*\]\s*\}"#).unwrap())
}

/// The last `{"range": [lower, upper]}` object in `text`, code fences allowed.
pub fn parse_range(text: &str) -> Result<WordRange, JudgeError> {
    let unparseable = |reason: &str| JudgeError::Unparseable {
        reason: reason.into(),
        raw: text.to_string(),
    };
    let caps = range_re()
        .captures_iter(text)
        .last()
        .ok_or_else(|| unparseable("no {\"range\": [lower, upper]} object"))?;
    let lower: u32 = caps[1].parse().map_err(|_| unparseable("bound out of range"))?;
    let upper: u32 = caps[2].parse().map_err(|_| unparseable("bound out of range"))?;
    if lower > upper {
        return Err(unparseable("lower bound exceeds upper bound"));
    }
    Ok(WordRange::new(lower, upper))
}

/// Outcome of the task-selection prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskClass {
    Writing(WordRange),
    NotWriting,
}

pub fn parse_task_class(text: &str) -> Result<TaskClass, JudgeError> {
    if let Ok(r) = parse_range(text) {
        return Ok(TaskClass::Writing(r));
    }
    let stripped = text
        .trim()
        .trim_start_matches("```")
        .trim_end_matches("```")
        .trim()
        .trim_matches(|c: char| c == '*' || c == '.' || c.is_whitespace());
    if stripped == "NotWriting" || text.lines().last().map(str::trim) == Some("NotWriting") {
        return Ok(TaskClass::NotWriting);
    }
    Err(JudgeError::Unparseable {
        reason: "expected NotWriting or a range object".into(),
        raw: text.to_string(),
    })
}

/// Ways a predicted range can break the assessor's own rules.
pub fn bound_rule_warnings(r: WordRange) -> Vec<String> {
    let mut out = Vec::new();
    if !r.lower.is_multiple_of(100) || !r.upper.is_multiple_of(100) {
        out.push(format!("bounds [{}, {}] are not multiples of 100", r.lower, r.upper));
    }
    if r.upper > 12_000 {
        out.push(format!("upper bound {} exceeds 12000", r.upper));
    }
    if r.upper - r.lower > 3_000 {
        out.push(format!("range width {} exceeds 3000", r.upper - r.lower));
    }
    out
}
