use std::collections::BTreeMap;

use super::{softmax, Context, ToyPolicy};
use crate::error::Result;

/// Sparse gradient over policy rows; absent rows are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradient {
    pub(crate) rows: BTreeMap<Context, Vec<f64>>,
}

impl Gradient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn row(&self, ctx: &Context) -> Option<&[f64]> {
        self.rows.get(ctx).map(Vec::as_slice)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&Context, &[f64])> {
        self.rows.iter().map(|(c, r)| (c, r.as_slice()))
    }

    pub fn set_row(&mut self, ctx: Context, row: Vec<f64>) {
        self.rows.insert(ctx, row);
    }

    /// `self += scale · other`
    pub fn add_scaled(&mut self, other: &Gradient, scale: f64) {
        for (ctx, g) in &other.rows {
            let row = self.rows.entry(ctx.clone()).or_insert_with(|| vec![0.0; g.len()]);
            for (x, y) in row.iter_mut().zip(g) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for row in self.rows.values_mut() {
            row.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn norm(&self) -> f64 {
        self.rows
            .values()
            .flat_map(|r| r.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.rows.values().flat_map(|r| r.iter()).all(|x| x.is_finite())
    }

    /// Adds `weight · ∂ log softmax(row/T)[token] / ∂ row` for one step.
    pub(crate) fn accumulate_step(
        &mut self,
        policy: &ToyPolicy,
        ctx: &Context,
        token: u32,
        temperature: f64,
        weight: f64,
    ) {
        if weight == 0.0 {
            return;
        }
        let probs = softmax(&policy.logits(ctx), temperature);
        let row = self.rows.entry(ctx.clone()).or_insert_with(|| vec![0.0; probs.len()]);
        for (v, (g, p)) in row.iter_mut().zip(&probs).enumerate() {
            let indicator = if v as u32 == token { 1.0 } else { 0.0 };
            *g += weight * (indicator - p) / temperature;
        }
    }
}

impl ToyPolicy {
    /// Exact gradient of [`ToyPolicy::sequence_logprob`] with respect to the
    /// logits table.
    pub fn logprob_gradient(&self, prompt_id: &str, tokens: &[u32], temperature: f64) -> Result<Gradient> {
        self.weighted_logprob_gradient(prompt_id, tokens, temperature, |_| 1.0)
    }

    /// `Σ_t weight(t) · ∇ log π(token_t | context_t)`
    pub fn weighted_logprob_gradient(
        &self,
        prompt_id: &str,
        tokens: &[u32],
        temperature: f64,
        weight: impl Fn(usize) -> f64,
    ) -> Result<Gradient> {
        self.check_tokens(tokens)?;
        let mut grad = Gradient::new();
        for (i, (ctx, &tok)) in self.contexts(prompt_id, tokens).iter().zip(tokens).enumerate() {
            grad.accumulate_step(self, ctx, tok, temperature, weight(i));
        }
        Ok(grad)
    }
}
