//! Reward channels and their fusion into a single advantage.
//!
//! Every channel implements [`RewardModel`]. A [`RewardStack`] holds one
//! model per channel (length, writing, format); concrete models are looked up
//! by name in [`reward_registry`], so a judge-backed writing scorer or an
//! alternative format check can be swapped in without touching the trainer.

mod format;
mod length;
mod writing;

use std::path::PathBuf;
use std::sync::Arc;

pub use format::{format_reward, repetition_fraction, FormatPolicy};
pub use length::length_reward;
pub use writing::{
    bt_pair_loss, extract_features, pair_deltas, pairwise_accuracy, train_writing_rm, PreferencePair, RmTrainConfig,
    RmTrainReport, WritingRm, FEATURE_DIM, FEATURE_NAMES, FEATURE_VERSION,
};

use crate::error::{Error, Result};
use crate::grpo::{group_normalize_with, StdMode};
use crate::registry::Registry;
use crate::structure::{parse_structured_output, OutputMode, StructuredOutput};
use crate::text::word_count;
use crate::types::{AdvantageVector, LengthSpec, RewardVector};

/// Everything a reward channel may look at for one completion.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub prompt: &'a str,
    pub raw: &'a str,
    pub parsed: Option<&'a StructuredOutput>,
    /// Words in the answer segment, or in the raw text when parsing failed.
    pub word_len: u32,
    pub length_spec: &'a LengthSpec,
}

impl Sample<'_> {
    /// The delivered text: the answer segment when parsed, else the raw text.
    pub fn answer_text(&self) -> &str {
        self.parsed.map(|p| p.answer.as_str()).unwrap_or(self.raw)
    }
}

pub trait RewardModel: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, sample: &Sample<'_>) -> f64;
}

pub struct LengthRm;

impl RewardModel for LengthRm {
    fn name(&self) -> &str {
        "length"
    }

    fn score(&self, sample: &Sample<'_>) -> f64 {
        length_reward(sample.word_len, sample.length_spec)
    }
}

pub struct FormatRm(pub FormatPolicy);

impl RewardModel for FormatRm {
    fn name(&self) -> &str {
        "format"
    }

    fn score(&self, sample: &Sample<'_>) -> f64 {
        format_reward(sample.raw, &self.0)
    }
}

pub struct LinearWritingRm(pub WritingRm);

impl RewardModel for LinearWritingRm {
    fn name(&self) -> &str {
        "writing-linear"
    }

    fn score(&self, sample: &Sample<'_>) -> f64 {
        self.0.score(sample.prompt, sample.answer_text())
    }
}

/// Construction parameters shared by the built-in reward factories.
#[derive(Debug, Clone, Default)]
pub struct RewardParams {
    pub format: FormatPolicy,
    pub writing_checkpoint: Option<PathBuf>,
}

pub type RewardRegistry = Registry<Arc<dyn RewardModel>, RewardParams>;

/// Built-in channels: `length`, `format`, `writing-linear` (loads
/// `writing_checkpoint`, or zero weights when none is given) and
/// `writing-zero`.
pub fn reward_registry() -> RewardRegistry {
    let mut reg = RewardRegistry::new("reward model");
    reg.register("length", |_| Ok(Arc::new(LengthRm) as Arc<dyn RewardModel>));
    reg.register("format", |p: &RewardParams| {
        p.format.validate()?;
        Ok(Arc::new(FormatRm(p.format)) as Arc<dyn RewardModel>)
    });
    reg.register("writing-linear", |p: &RewardParams| {
        let rm = match &p.writing_checkpoint {
            Some(path) => WritingRm::load(path)?,
            None => WritingRm::zeros(),
        };
        Ok(Arc::new(LinearWritingRm(rm)) as Arc<dyn RewardModel>)
    });
    reg.register("writing-zero", |_| {
        Ok(Arc::new(LinearWritingRm(WritingRm::zeros())) as Arc<dyn RewardModel>)
    });
    reg
}

/// One model per reward channel.
#[derive(Clone)]
pub struct RewardStack {
    pub length: Arc<dyn RewardModel>,
    pub write: Arc<dyn RewardModel>,
    pub format: Arc<dyn RewardModel>,
}

impl RewardStack {
    pub fn from_registry(registry: &RewardRegistry, names: [&str; 3], params: &RewardParams) -> Result<Self> {
        Ok(Self {
            length: registry.create(names[0], params)?,
            write: registry.create(names[1], params)?,
            format: registry.create(names[2], params)?,
        })
    }

    /// `length`, `writing-linear`, `format`.
    pub fn standard(params: &RewardParams) -> Result<Self> {
        Self::from_registry(&reward_registry(), ["length", "writing-linear", "format"], params)
    }

    /// Parses `raw` under `mode` and scores it on all three channels.
    pub fn score_text(&self, prompt: &str, raw: &str, spec: &LengthSpec, mode: OutputMode) -> RewardVector {
        let parsed = parse_structured_output(raw, mode).ok();
        let word_len = word_count(parsed.as_ref().map_or(raw, |p| p.answer.as_str()));
        self.score(&Sample {
            prompt,
            raw,
            parsed: parsed.as_ref(),
            word_len,
            length_spec: spec,
        })
    }

    pub fn score(&self, sample: &Sample<'_>) -> RewardVector {
        RewardVector {
            length: self.length.score(sample),
            write: self.write.score(sample),
            format: self.format.score(sample),
        }
    }
}

/// Normalizes each channel within the group, then averages the three
/// per-sample advantages.
pub fn composite_advantages(rewards: &[RewardVector]) -> Result<Vec<AdvantageVector>> {
    composite_advantages_with(rewards, StdMode::Population)
}

pub fn composite_advantages_with(rewards: &[RewardVector], mode: StdMode) -> Result<Vec<AdvantageVector>> {
    if rewards.iter().any(|r| r.as_array().iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite("reward matrix".into()));
    }
    let column = |f: fn(&RewardVector) -> f64| -> Result<Vec<f64>> {
        group_normalize_with(&rewards.iter().map(f).collect::<Vec<_>>(), mode)
    };
    let length = column(|r| r.length)?;
    let write = column(|r| r.write)?;
    let format = column(|r| r.format)?;
    Ok((0..rewards.len())
        .map(|i| AdvantageVector::from_channels(length[i], write[i], format[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rv(length: f64, write: f64, format: f64) -> RewardVector {
        RewardVector { length, write, format }
    }

    #[test]
    fn constant_channels_fuse_to_zero() {
        let adv = composite_advantages(&[rv(0.5, 1.0, 1.0); 4]).unwrap();
        assert!(adv.iter().all(|a| a.fused == 0.0));
    }

    #[test]
    fn fused_is_mean_of_normalized_channels() {
        // Channels chosen so that per-sample advantages are (1, -1, 1) / (-1, 1, -1).
        let adv = composite_advantages(&[rv(1.0, 0.0, 5.0), rv(0.0, 3.0, 2.0)]).unwrap();
        assert!((adv[0].fused - 1.0 / 3.0).abs() < 1e-15);
        assert!((adv[1].fused + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn scaling_length_rewards_changes_nothing() {
        let base = [
            rv(0.2, 1.0, 0.0),
            rv(0.9, -0.3, 1.0),
            rv(0.4, 2.0, 1.0),
            rv(0.7, 0.1, 0.5),
        ];
        let scaled: Vec<_> = base.iter().map(|r| rv(7.0 * r.length, r.write, r.format)).collect();
        let (a, b) = (
            composite_advantages(&base).unwrap(),
            composite_advantages(&scaled).unwrap(),
        );
        for (x, y) in a.iter().zip(&b) {
            assert!((x.fused - y.fused).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(composite_advantages(&[rv(0.0, 0.0, 0.0)]).is_err());
        assert!(composite_advantages(&[rv(f64::NAN, 0.0, 0.0), rv(0.0, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn registry_builds_standard_stack() {
        let stack = RewardStack::standard(&RewardParams::default()).unwrap();
        assert_eq!(stack.length.name(), "length");
        assert_eq!(stack.write.name(), "writing-linear");
        assert_eq!(stack.format.name(), "format");
        let spec = LengthSpec::new(1, 3, 10).unwrap();
        let raw = "<think>t</think><answer>a b</answer>";
        let parsed = crate::structure::parse_structured_output(raw, Default::default()).unwrap();
        let r = stack.score(&Sample {
            prompt: "p",
            raw,
            parsed: Some(&parsed),
            word_len: 2,
            length_spec: &spec,
        });
        assert_eq!(r, rv(1.0, 0.0, 1.0));
        assert!(reward_registry().create("nope", &RewardParams::default()).is_err());
    }

    proptest! {
        #[test]
        fn affine_invariance(
            raw in prop::collection::vec((0.0f64..1.0, -3.0f64..3.0, 0.0f64..1.0), 2..40),
            channel in 0usize..3,
            a in 0.01f64..100.0,
            b in -5.0f64..5.0,
        ) {
            let base: Vec<_> = raw.iter().map(|&(l, w, f)| rv(l, w, f)).collect();
            let moved: Vec<_> = base.iter().map(|r| {
                let mut x = r.as_array();
                x[channel] = a * x[channel] + b;
                rv(x[0], x[1], x[2])
            }).collect();
            let (p, q) = (composite_advantages(&base).unwrap(), composite_advantages(&moved).unwrap());
            for (x, y) in p.iter().zip(&q) {
                prop_assert!((x.fused - y.fused).abs() < 1e-9);
            }
        }
    }
}
