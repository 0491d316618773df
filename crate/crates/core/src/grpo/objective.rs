//! Clipped surrogate, KL penalty and the analytic gradient of the full
//! objective with respect to the policy table.

use crate::error::{Error, Result};
use crate::policy::{Gradient, ToyPolicy};
use crate::types::{AdvantageVector, PromptSpec, Trajectory};

/// `min(ratio·A, clip(ratio, 1−ε, 1+ε)·A)`
pub fn clipped_surrogate(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// True when the clipped branch is the minimum and differs from the
/// unclipped one, i.e. the term has zero gradient.
pub fn clip_binds(ratio: f64, advantage: f64, epsilon: f64) -> bool {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    clipped != ratio && clipped * advantage < ratio * advantage
}

/// Per-token mean of `exp(Δ) − Δ − 1` with `Δ = logp_ref − logp_policy`.
pub fn kl_penalty(logp_policy: &[f64], logp_ref: &[f64]) -> Result<f64> {
    if logp_policy.len() != logp_ref.len() {
        return Err(Error::LengthMismatch {
            what: "policy vs reference log-probs",
            left: logp_policy.len(),
            right: logp_ref.len(),
        });
    }
    if logp_policy.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = logp_policy
        .iter()
        .zip(logp_ref)
        .map(|(p, r)| {
            let d = r - p;
            d.exp_m1() - d
        })
        .sum();
    Ok((total / logp_policy.len() as f64).max(0.0))
}

/// One prompt's group of trajectories with their fused advantages.
#[derive(Debug, Clone)]
pub struct GroupBatch {
    pub prompt: PromptSpec,
    pub trajectories: Vec<Trajectory>,
    pub advantages: Vec<AdvantageVector>,
    /// Per-token log-probs under the reference policy; needed when β > 0.
    pub reference_logps: Option<Vec<Vec<f64>>>,
}

impl GroupBatch {
    pub fn validate(&self) -> Result<()> {
        if self.trajectories.len() != self.advantages.len() {
            return Err(Error::LengthMismatch {
                what: "trajectories vs advantages",
                left: self.trajectories.len(),
                right: self.advantages.len(),
            });
        }
        if let Some(t) = self.trajectories.iter().find(|t| t.prompt_id != self.prompt.id) {
            return Err(Error::invariant(
                "group",
                format!("trajectory for `{}` in group for `{}`", t.prompt_id, self.prompt.id),
            ));
        }
        Ok(())
    }

    /// Sequence-level importance ratio of trajectory `i`.
    pub fn ratio(&self, i: usize) -> f64 {
        let t = &self.trajectories[i];
        (t.logp_current_sum() - t.logp_behavior_sum()).exp()
    }

    /// Recomputes `logp_current` under `policy`.
    pub fn refresh_current(&mut self, policy: &ToyPolicy, temperature: f64) -> Result<()> {
        for t in &mut self.trajectories {
            t.logp_current = policy.token_logprobs(&t.prompt_id, &t.tokens, temperature)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub objective: f64,
    pub clip_fraction: f64,
}

/// `(1/G) Σ clipped_surrogate(ratio_i, A_i, ε) − β · mean_i KL_i`
pub fn grpo_objective(batch: &GroupBatch, epsilon: f64, beta: f64) -> Result<ObjectiveValue> {
    batch.validate()?;
    let g = batch.trajectories.len();
    if g == 0 {
        return Err(Error::EmptyDataset("group has no trajectories".into()));
    }
    let mut surrogate = 0.0;
    let mut clipped = 0usize;
    for i in 0..g {
        let ratio = batch.ratio(i);
        let a = batch.advantages[i].fused;
        surrogate += clipped_surrogate(ratio, a, epsilon);
        clipped += usize::from(clip_binds(ratio, a, epsilon));
    }
    let mut objective = surrogate / g as f64;
    if beta > 0.0 {
        let refs = batch
            .reference_logps
            .as_ref()
            .ok_or_else(|| Error::invariant("reference_logps", "required when beta > 0"))?;
        let mut kl = 0.0;
        for (t, r) in batch.trajectories.iter().zip(refs) {
            kl += kl_penalty(&t.logp_current, r)?;
        }
        objective -= beta * kl / g as f64;
    }
    if !objective.is_finite() {
        return Err(Error::NonFinite("GRPO objective".into()));
    }
    Ok(ObjectiveValue {
        objective,
        clip_fraction: clipped as f64 / g as f64,
    })
}

/// Gradient of [`grpo_objective`] with respect to the logits of `policy`,
/// assuming `batch.trajectories[*].logp_current` were computed from `policy`.
///
/// Surrogate terms contribute `A·ratio·∇log π(o)` on the unclipped branch and
/// nothing when the clip binds. The KL term contributes
/// `β/(G·|o|) Σ_t (exp(Δ_t) − 1)·∇log π(o_t)`.
pub fn grpo_gradient(
    policy: &ToyPolicy,
    batch: &GroupBatch,
    epsilon: f64,
    beta: f64,
    temperature: f64,
) -> Result<Gradient> {
    batch.validate()?;
    let g = batch.trajectories.len() as f64;
    let mut total = Gradient::new();
    for (i, t) in batch.trajectories.iter().enumerate() {
        let ratio = batch.ratio(i);
        let a = batch.advantages[i].fused;
        let seq_weight = if clip_binds(ratio, a, epsilon) {
            0.0
        } else {
            a * ratio / g
        };
        let kl_weights: Option<Vec<f64>> = if beta > 0.0 {
            let refs = batch
                .reference_logps
                .as_ref()
                .ok_or_else(|| Error::invariant("reference_logps", "required when beta > 0"))?;
            let r = &refs[i];
            if r.len() != t.tokens.len() {
                return Err(Error::LengthMismatch {
                    what: "reference log-probs vs tokens",
                    left: r.len(),
                    right: t.tokens.len(),
                });
            }
            let n = t.tokens.len().max(1) as f64;
            Some(
                t.logp_current
                    .iter()
                    .zip(r)
                    .map(|(p, q)| beta * (q - p).exp_m1() / (g * n))
                    .collect(),
            )
        } else {
            None
        };
        let grad = policy.weighted_logprob_gradient(&t.prompt_id, &t.tokens, temperature, |k| {
            seq_weight + kl_weights.as_ref().map_or(0.0, |w| w[k])
        })?;
        total.add_scaled(&grad, 1.0);
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("GRPO gradient".into()));
    }
    Ok(total)
}
