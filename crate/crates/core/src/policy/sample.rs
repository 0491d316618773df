use rand::Rng;

use super::{log_softmax, ToyPolicy};
use crate::structure::{parse_structured_output, OutputMode};
use crate::text::word_count;
use crate::types::Trajectory;

/// Temperature value that selects greedy (argmax) decoding.
pub const GREEDY: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
    pub mode: OutputMode,
}

impl Default for SampleParams {
    fn default() -> Self {
        Self {
            temperature: 0.8,
            top_p: 1.0,
            max_tokens: 14_000,
            mode: OutputMode::ThinkRequired,
        }
    }
}

/// Index drawn from the smallest probability-sorted prefix whose mass reaches
/// `top_p`, renormalized. `u` is uniform on `[0, 1)`.
pub(crate) fn nucleus_pick(probs: &[f64], top_p: f64, u: f64) -> usize {
    let pick = |order: &mut dyn Iterator<Item = usize>, mass: f64| {
        let target = u * mass;
        let mut acc = 0.0;
        let mut last = 0;
        for i in order {
            acc += probs[i];
            last = i;
            if target < acc {
                return i;
            }
        }
        last
    };
    if top_p >= 1.0 {
        let nonzero: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
        return pick(&mut nonzero.into_iter(), 1.0);
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut mass = 0.0;
    let mut cut = order.len();
    for (k, &i) in order.iter().enumerate() {
        mass += probs[i];
        if mass >= top_p {
            cut = k + 1;
            break;
        }
    }
    pick(&mut order[..cut].iter().copied(), mass)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

impl ToyPolicy {
    /// Samples one completion. Log-probabilities are recorded under the full
    /// tempered distribution (before the top-p cut) and stored as both the
    /// current and the behavior values.
    pub fn sample<R: Rng + ?Sized>(&self, prompt_id: &str, params: &SampleParams, rng: &mut R) -> Trajectory {
        let eos = self.vocab.eos();
        let greedy = params.temperature == GREEDY;
        let mut ctx = self.start_context(prompt_id);
        let mut tokens = Vec::new();
        let mut logps = Vec::new();
        while tokens.len() < params.max_tokens {
            let logits = self.logits(&ctx);
            let (tok, lp) = if greedy {
                (argmax(&logits), 0.0)
            } else {
                let lps = log_softmax(&logits, params.temperature);
                let probs: Vec<f64> = lps.iter().map(|x| x.exp()).collect();
                let tok = nucleus_pick(&probs, params.top_p, rng.gen::<f64>());
                (tok, lps[tok])
            };
            let tok = tok as u32;
            tokens.push(tok);
            logps.push(lp);
            if tok == eos {
                break;
            }
            ctx = ctx.advance(tok);
        }
        let truncated = tokens.len() == params.max_tokens && tokens.last() != Some(&eos);
        self.assemble(prompt_id, tokens, logps, truncated, params.mode)
    }

    /// Builds a trajectory record from emitted tokens.
    pub fn assemble(
        &self,
        prompt_id: &str,
        tokens: Vec<u32>,
        logps: Vec<f64>,
        truncated: bool,
        mode: OutputMode,
    ) -> Trajectory {
        let raw_text = self.vocab.render(&tokens);
        let parsed = parse_structured_output(&raw_text, mode).ok();
        let word_len = match &parsed {
            Some(p) => word_count(&p.answer),
            None => word_count(&raw_text),
        };
        Trajectory {
            prompt_id: prompt_id.to_string(),
            raw_text,
            think: parsed.as_ref().map(|p| p.think.clone()),
            answer: parsed.map(|p| p.answer),
            tokens,
            logp_current: logps.clone(),
            logp_behavior: logps,
            word_len,
            truncated,
        }
    }
}
