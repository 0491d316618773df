use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structure::{parse_structured_output, OutputMode};
use crate::text::{char_shingles, jaccard, split_sentences};

/// Parameters of the format reward: structure mode plus the near-duplicate
/// sentence detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormatPolicy {
    pub shingle_k: usize,
    pub dup_threshold: f64,
    pub rep_weight: f64,
    pub mode: OutputMode,
}

impl Default for FormatPolicy {
    fn default() -> Self {
        Self {
            shingle_k: 8,
            dup_threshold: 0.8,
            rep_weight: 2.0,
            mode: OutputMode::ThinkRequired,
        }
    }
}

impl FormatPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.shingle_k < 2 {
            return Err(Error::invariant("shingle_k", "must be >= 2"));
        }
        if !(self.dup_threshold > 0.0 && self.dup_threshold <= 1.0) {
            return Err(Error::invariant("dup_threshold", "must lie in (0, 1]"));
        }
        if !self.rep_weight.is_finite() || self.rep_weight < 0.0 {
            return Err(Error::invariant("rep_weight", "must be >= 0"));
        }
        Ok(())
    }
}

/// Fraction of sentences that near-duplicate an earlier sentence.
pub fn repetition_fraction(answer: &str, policy: &FormatPolicy) -> f64 {
    let sentences = split_sentences(answer);
    if sentences.len() < 2 {
        return 0.0;
    }
    let shingles: Vec<_> = sentences.iter().map(|s| char_shingles(s, policy.shingle_k)).collect();
    let duplicated = (1..shingles.len())
        .filter(|&i| {
            shingles[..i]
                .iter()
                .any(|earlier| jaccard(&shingles[i], earlier) >= policy.dup_threshold)
        })
        .count();
    duplicated as f64 / sentences.len() as f64
}

/// Structure gate followed by a clamped repetition penalty.
pub fn format_reward(raw: &str, policy: &FormatPolicy) -> f64 {
    match parse_structured_output(raw, policy.mode) {
        Ok(out) => (1.0 - policy.rep_weight * repetition_fraction(&out.answer, policy)).max(0.0),
        Err(_) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn repetition_examples() {
        let p = FormatPolicy::default();
        assert_eq!(repetition_fraction("All unique one. Totally different two.", &p), 0.0);
        assert_eq!(
            repetition_fraction("the same exact sentence here. the same exact sentence here.", &p),
            0.5
        );
        assert_eq!(repetition_fraction("", &p), 0.0);
        assert_eq!(repetition_fraction("just one sentence", &p), 0.0);
    }

    #[test]
    fn near_duplicates_count_once_each() {
        let p = FormatPolicy::default();
        let text = "The river runs quietly through the old town. \
                    The river runs quietly through the old town! \
                    The river runs quietly through the old towns? \
                    Something else entirely happens later on.";
        assert_eq!(repetition_fraction(text, &p), 0.5);
    }

    #[test]
    fn format_examples() {
        let p = FormatPolicy::default();
        assert_eq!(format_reward("<think>plan</think><answer>One. Two.</answer>", &p), 1.0);
        assert_eq!(format_reward("<think>plan</think><answer>text", &p), 0.0);
        let dup = "<think>x</think><answer>the same exact sentence here. the same exact sentence here.</answer>";
        assert_eq!(format_reward(dup, &p), 0.0);
        let mild = FormatPolicy { rep_weight: 1.0, ..p };
        assert_eq!(format_reward(dup, &mild), 0.5);
    }

    proptest! {
        #[test]
        fn perfect_format_implies_parse(raw in "(<think>|</think>|<answer>|</answer>|[a-z .]{0,6}){0,8}") {
            let p = FormatPolicy::default();
            let r = format_reward(&raw, &p);
            prop_assert!((0.0..=1.0).contains(&r));
            if r == 1.0 {
                prop_assert!(parse_structured_output(&raw, p.mode).is_ok());
            }
        }
    }
}
