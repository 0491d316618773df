use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{grpo_gradient, grpo_objective, GroupBatch};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::policy::{Gradient, SampleParams, ToyPolicy};
use crate::rewards::{composite_advantages_with, RewardStack, Sample};
use crate::structure::StructuredOutput;
use crate::types::{PromptSpec, RewardVector, Trajectory};

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    /// Batch objective after the update, evaluated on the step's samples.
    pub objective: f64,
    pub length_rm_mean: f64,
    pub writing_rm_mean: f64,
    pub format_rm_mean: f64,
    /// `None` when every trajectory hit `max_tokens`.
    pub mean_nonoverlong_len: Option<f64>,
    pub format_compliance_rate: f64,
    pub clip_fraction: f64,
}

impl StepMetrics {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("format_compliance_rate", self.format_compliance_rate),
            ("clip_fraction", self.clip_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invariant(name, format!("{v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the RNG stream for one trajectory.
pub fn stream_seed(seed: u64, step: u64, prompt: usize, trajectory: usize) -> u64 {
    [step, prompt as u64, trajectory as u64]
        .into_iter()
        .fold(splitmix64(seed), |acc, x| splitmix64(acc ^ x))
}

/// Prompts used at `step`: a cyclic window over the prompt set.
pub fn select_batch(prompts: &[PromptSpec], step: u64, batch: usize) -> Vec<PromptSpec> {
    if prompts.is_empty() {
        return Vec::new();
    }
    let start = (step as usize).wrapping_mul(batch) % prompts.len();
    (0..batch)
        .map(|j| prompts[(start + j) % prompts.len()].clone())
        .collect()
}

fn score(rewards: &RewardStack, prompt: &PromptSpec, t: &Trajectory) -> Result<RewardVector> {
    let spec = prompt
        .length_spec
        .as_ref()
        .ok_or_else(|| Error::invariant("length_spec", format!("prompt `{}` has no length spec", prompt.id)))?;
    let parsed = t.answer.as_ref().map(|answer| StructuredOutput {
        think: t.think.clone().unwrap_or_default(),
        answer: answer.clone(),
    });
    Ok(rewards.score(&Sample {
        prompt: &prompt.text,
        raw: &t.raw_text,
        parsed: parsed.as_ref(),
        word_len: t.word_len,
        length_spec: spec,
    }))
}

/// Samples `G` trajectories per prompt under `policy` and scores them.
/// Each trajectory has its own RNG stream, so the result does not depend on
/// thread scheduling.
pub fn sample_groups(
    policy: &ToyPolicy,
    batch: &[PromptSpec],
    rewards: &RewardStack,
    config: &TrainConfig,
    step: u64,
) -> Result<Vec<(Vec<Trajectory>, Vec<RewardVector>)>> {
    let params = SampleParams {
        temperature: config.temperature,
        top_p: config.top_p,
        max_tokens: config.max_tokens,
        mode: config.prompt_mode,
    };
    let g = config.group_size;
    let flat: Vec<(Trajectory, RewardVector)> = (0..batch.len() * g)
        .into_par_iter()
        .map(|k| {
            let (j, i) = (k / g, k % g);
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, step, j, i));
            let t = policy.sample(&batch[j].id, &params, &mut rng);
            let r = score(rewards, &batch[j], &t)?;
            Ok((t, r))
        })
        .collect::<Result<_>>()?;
    let mut groups = Vec::with_capacity(batch.len());
    let mut it = flat.into_iter();
    for _ in 0..batch.len() {
        let (ts, rs): (Vec<_>, Vec<_>) = it.by_ref().take(g).unzip();
        groups.push((ts, rs));
    }
    Ok(groups)
}

/// Mean over groups of the per-group objective and clip fraction.
fn batch_objective(groups: &[GroupBatch], config: &TrainConfig) -> Result<(f64, f64)> {
    let mut obj = 0.0;
    let mut clip = 0.0;
    for b in groups {
        let v = grpo_objective(b, config.epsilon, config.beta)?;
        obj += v.objective;
        clip += v.clip_fraction;
    }
    let n = groups.len() as f64;
    Ok((obj / n, clip / n))
}

/// One GRPO step: sample under the behavior snapshot, score, fuse
/// advantages, then `inner_updates` gradient-ascent updates on the batch
/// objective. On error the policy is left untouched.
pub fn train_step(
    policy: &mut ToyPolicy,
    reference: &ToyPolicy,
    batch: &[PromptSpec],
    rewards: &RewardStack,
    config: &TrainConfig,
    step: u64,
) -> Result<StepMetrics> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset("training batch".into()));
    }
    let t = config.temperature;
    let sampled = sample_groups(policy, batch, rewards, config, step)?;

    let mut all_rewards = Vec::new();
    let mut nonoverlong = Vec::new();
    let mut compliant = 0usize;
    let mut groups = Vec::with_capacity(batch.len());
    for (prompt, (trajectories, rs)) in batch.iter().zip(sampled) {
        for tr in &trajectories {
            if !tr.truncated {
                nonoverlong.push(tr.word_len as f64);
            }
            compliant += usize::from(tr.answer.is_some());
        }
        let advantages = composite_advantages_with(&rs, config.std_mode)?;
        all_rewards.extend(rs);
        let reference_logps = if config.beta > 0.0 {
            Some(
                trajectories
                    .iter()
                    .map(|tr| reference.token_logprobs(&prompt.id, &tr.tokens, t))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        groups.push(GroupBatch {
            prompt: prompt.clone(),
            trajectories,
            advantages,
            reference_logps,
        });
    }

    let mut next = policy.clone();
    let n = groups.len() as f64;
    for inner in 0..config.inner_updates {
        if inner > 0 {
            for b in &mut groups {
                b.refresh_current(&next, t)?;
            }
        }
        let mut grad = Gradient::new();
        for b in &groups {
            grad.add_scaled(&grpo_gradient(&next, b, config.epsilon, config.beta, t)?, 1.0 / n);
        }
        if !grad.is_finite() {
            return Err(Error::NonFinite(format!("gradient at step {step}")));
        }
        next.apply_update(&grad, config.learning_rate)?;
    }
    for b in &mut groups {
        b.refresh_current(&next, t)?;
    }
    let (objective, clip_fraction) = batch_objective(&groups, config)?;
    *policy = next;

    let count = all_rewards.len() as f64;
    let mean = |f: fn(&RewardVector) -> f64| all_rewards.iter().map(f).sum::<f64>() / count;
    let metrics = StepMetrics {
        step,
        objective,
        length_rm_mean: mean(|r| r.length),
        writing_rm_mean: mean(|r| r.write),
        format_rm_mean: mean(|r| r.format),
        mean_nonoverlong_len: (!nonoverlong.is_empty())
            .then(|| nonoverlong.iter().sum::<f64>() / nonoverlong.len() as f64),
        format_compliance_rate: compliant as f64 / count,
        clip_fraction,
    };
    metrics.validate()?;
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_seeds_differ() {
        let mut seen = std::collections::HashSet::new();
        for step in 0..4 {
            for p in 0..4 {
                for t in 0..4 {
                    assert!(seen.insert(stream_seed(0, step, p, t)));
                }
            }
        }
        assert_ne!(stream_seed(0, 0, 0, 0), stream_seed(1, 0, 0, 0));
    }

    #[test]
    fn batches_cycle() {
        let prompts: Vec<_> = (0..3).map(|i| PromptSpec::new(format!("p{i}"), "x").unwrap()).collect();
        let ids = |s| {
            select_batch(&prompts, s, 2)
                .into_iter()
                .map(|p| p.id)
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(0), ["p0", "p1"]);
        assert_eq!(ids(1), ["p2", "p0"]);
        assert!(select_batch(&[], 0, 2).is_empty());
    }
}
