//! Domain types shared by rewards, training and evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Word cap applied when neither the judge nor an explicit count supplies one.
/// Kept below the 14,000-token sampling cap so the over-length branch of the
/// length reward stays reachable.
pub const DEFAULT_LENGTH_CAP: u32 = 13_000;

/// A `[lower, upper]` word-count band as predicted by a judge or extracted
/// from an explicit request, before a hard cap is attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordRange {
    pub lower: u32,
    pub upper: u32,
}

impl WordRange {
    pub fn new(lower: u32, upper: u32) -> Self {
        Self { lower, upper }
    }

    /// `[0, 0]` is the judge's way of saying the request cannot be served.
    pub fn is_degenerate(&self) -> bool {
        self.lower == 0 && self.upper == 0
    }

    /// Attaches a hard cap. When the band reaches the cap, the cap is moved to
    /// twice the upper bound so that `upper < max` still holds.
    pub fn with_cap(self, cap: u32) -> Result<LengthSpec> {
        let max = if self.upper < cap {
            cap
        } else {
            self.upper.saturating_mul(2).max(self.upper + 1)
        };
        LengthSpec::new(self.lower, self.upper, max)
    }
}

/// Target band and hard cap for the length reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLengthSpec")]
pub struct LengthSpec {
    lower: u32,
    upper: u32,
    max: u32,
}

#[derive(Deserialize)]
struct RawLengthSpec {
    lower: u32,
    upper: u32,
    max: u32,
}

impl TryFrom<RawLengthSpec> for LengthSpec {
    type Error = Error;

    fn try_from(r: RawLengthSpec) -> Result<Self> {
        LengthSpec::new(r.lower, r.upper, r.max)
    }
}

impl LengthSpec {
    pub fn new(lower: u32, upper: u32, max: u32) -> Result<Self> {
        if lower > upper {
            return Err(Error::invariant(
                "length_spec",
                format!("lower {lower} exceeds upper {upper}"),
            ));
        }
        if upper >= max {
            return Err(Error::invariant(
                "length_spec",
                format!("upper {upper} must be below max {max}"),
            ));
        }
        Ok(Self { lower, upper, max })
    }

    pub fn lower(&self) -> u32 {
        self.lower
    }

    pub fn upper(&self) -> u32 {
        self.upper
    }

    pub fn max(&self) -> u32 {
        self.max
    }

    pub fn range(&self) -> WordRange {
        WordRange::new(self.lower, self.upper)
    }
}

/// One training or evaluation prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_spec: Option<LengthSpec>,
}

impl PromptSpec {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        if id.is_empty() {
            return Err(Error::invariant("prompt.id", "must be non-empty"));
        }
        if text.is_empty() {
            return Err(Error::invariant("prompt.text", format!("prompt `{id}` has empty text")));
        }
        Ok(Self {
            id,
            text,
            length_spec: None,
        })
    }

    pub fn with_length_spec(mut self, spec: LengthSpec) -> Self {
        self.length_spec = Some(spec);
        self
    }
}

/// Checks that prompt ids are unique within a set.
pub fn check_unique_ids(prompts: &[PromptSpec]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for p in prompts {
        if !seen.insert(p.id.as_str()) {
            return Err(Error::invariant("prompt.id", format!("duplicate id `{}`", p.id)));
        }
    }
    Ok(())
}

/// One sampled completion together with the log-probabilities needed for
/// the importance ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub prompt_id: String,
    pub raw_text: String,
    pub think: Option<String>,
    pub answer: Option<String>,
    pub tokens: Vec<u32>,
    pub logp_current: Vec<f64>,
    pub logp_behavior: Vec<f64>,
    pub word_len: u32,
    pub truncated: bool,
}

impl Trajectory {
    pub fn validate(&self, max_tokens: usize) -> Result<()> {
        if self.tokens.len() != self.logp_current.len() {
            return Err(Error::LengthMismatch {
                what: "tokens vs logp_current",
                left: self.tokens.len(),
                right: self.logp_current.len(),
            });
        }
        if self.tokens.len() != self.logp_behavior.len() {
            return Err(Error::LengthMismatch {
                what: "tokens vs logp_behavior",
                left: self.tokens.len(),
                right: self.logp_behavior.len(),
            });
        }
        if self.truncated && self.tokens.len() != max_tokens {
            return Err(Error::invariant(
                "trajectory.truncated",
                format!("{} tokens but cap is {max_tokens}", self.tokens.len()),
            ));
        }
        Ok(())
    }

    pub fn is_well_formed(&self) -> bool {
        self.answer.is_some()
    }

    /// Sum of per-token log-probabilities under the policy being optimized.
    pub fn logp_current_sum(&self) -> f64 {
        self.logp_current.iter().sum()
    }

    pub fn logp_behavior_sum(&self) -> f64 {
        self.logp_behavior.iter().sum()
    }
}

/// Raw scores of the three reward channels for one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardVector {
    pub length: f64,
    pub write: f64,
    pub format: f64,
}

impl RewardVector {
    pub fn as_array(&self) -> [f64; 3] {
        [self.length, self.write, self.format]
    }
}

/// Group-normalized advantages per channel plus their fused mean.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdvantageVector {
    pub length: f64,
    pub write: f64,
    pub format: f64,
    pub fused: f64,
}

impl AdvantageVector {
    pub fn from_channels(length: f64, write: f64, format: f64) -> Self {
        Self {
            length,
            write,
            format,
            fused: (length + write + format) / 3.0,
        }
    }
}
