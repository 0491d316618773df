//! Tabular autoregressive softmax policy.
//!
//! Each row of the table holds one logit per vocabulary entry and is keyed by
//! a [`Context`]: a prompt slot plus the previous `order` tokens. Rows that
//! have never been written read as all-zero (uniform). The prompt slot is
//! `fnv1a64(prompt_id) % prompt_slots`; the toy policy never reads prompt
//! text. Generation starts from a context filled with the end-of-sequence id.

mod gradient;
mod init;
mod sample;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use gradient::Gradient;
pub use init::{policy_init_registry, PolicyInitParams, PolicyInitRegistry, DEMO_WORDS};
pub use sample::{SampleParams, GREEDY};

use crate::error::{Error, Result};
use crate::structure::{ANSWER_CLOSE, ANSWER_OPEN, THINK_CLOSE, THINK_OPEN};

pub const EOS: &str = "<eos>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    eos: u32,
}

impl Vocab {
    /// Structural tokens first (`<think>`, `</think>`, `<answer>`,
    /// `</answer>`, `<eos>`), then the given words.
    pub fn with_words<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        let mut tokens: Vec<String> = [THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE, EOS]
            .iter()
            .map(|s| s.to_string())
            .collect();
        tokens.extend(words.iter().map(|w| w.as_ref().to_string()));
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 6 {
            return Err(Error::invariant(
                "vocab",
                format!("needs at least 6 entries, got {}", tokens.len()),
            ));
        }
        for required in [THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE, EOS] {
            if !tokens.iter().any(|t| t == required) {
                return Err(Error::invariant("vocab", format!("missing `{required}`")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for t in &tokens {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::invariant("vocab", format!("bad token {t:?}")));
            }
            if !seen.insert(t) {
                return Err(Error::invariant("vocab", format!("duplicate token `{t}`")));
            }
        }
        let eos = tokens.iter().position(|t| t == EOS).unwrap() as u32;
        Ok(Self { tokens, eos })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn eos(&self) -> u32 {
        self.eos
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.tokens.iter().position(|t| t == token).map(|i| i as u32)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Space-joined surface text, end-of-sequence omitted.
    pub fn render(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter(|&&id| id != self.eos)
            .filter_map(|&id| self.token(id))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Context {
    pub slot: u32,
    pub tokens: Vec<u32>,
}

impl Context {
    fn key(&self) -> String {
        let toks: Vec<String> = self.tokens.iter().map(u32::to_string).collect();
        format!("{}|{}", self.slot, toks.join(","))
    }

    fn from_key(key: &str, order: usize) -> Result<Self> {
        let bad = || Error::parse("policy.rows", format!("bad context key `{key}`"));
        let (slot, toks) = key.split_once('|').ok_or_else(bad)?;
        let tokens = if toks.is_empty() {
            Vec::new()
        } else {
            toks.split(',')
                .map(|t| t.parse().map_err(|_| bad()))
                .collect::<Result<Vec<u32>>>()?
        };
        if tokens.len() != order {
            return Err(bad());
        }
        Ok(Self {
            slot: slot.parse().map_err(|_| bad())?,
            tokens,
        })
    }

    fn advance(&self, token: u32) -> Self {
        let mut tokens = self.tokens.clone();
        if !tokens.is_empty() {
            tokens.remove(0);
            tokens.push(token);
        }
        Self {
            slot: self.slot,
            tokens,
        }
    }
}

/// 64-bit FNV-1a, used to map prompt ids onto slots.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy {
    vocab: Vocab,
    order: usize,
    prompt_slots: u32,
    rows: BTreeMap<Context, Vec<f64>>,
}

impl ToyPolicy {
    pub fn new(vocab: Vocab, order: usize, prompt_slots: u32) -> Result<Self> {
        if prompt_slots == 0 {
            return Err(Error::invariant("prompt_slots", "must be >= 1"));
        }
        Ok(Self {
            vocab,
            order,
            prompt_slots,
            rows: BTreeMap::new(),
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn prompt_slots(&self) -> u32 {
        self.prompt_slots
    }

    pub fn start_context(&self, prompt_id: &str) -> Context {
        Context {
            slot: (fnv1a64(prompt_id.as_bytes()) % u64::from(self.prompt_slots)) as u32,
            tokens: vec![self.vocab.eos(); self.order],
        }
    }

    /// Contexts visited while emitting `tokens`, one per token.
    pub fn contexts(&self, prompt_id: &str, tokens: &[u32]) -> Vec<Context> {
        let mut ctx = self.start_context(prompt_id);
        let mut out = Vec::with_capacity(tokens.len());
        for &t in tokens {
            let next = ctx.advance(t);
            out.push(ctx);
            ctx = next;
        }
        out
    }

    pub fn logits(&self, ctx: &Context) -> std::borrow::Cow<'_, [f64]> {
        match self.rows.get(ctx) {
            Some(row) => std::borrow::Cow::Borrowed(row),
            None => std::borrow::Cow::Owned(vec![0.0; self.vocab.len()]),
        }
    }

    pub fn set_row(&mut self, ctx: Context, logits: Vec<f64>) -> Result<()> {
        if logits.len() != self.vocab.len() {
            return Err(Error::LengthMismatch {
                what: "row vs vocab",
                left: logits.len(),
                right: self.vocab.len(),
            });
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("policy row".into()));
        }
        if ctx.tokens.len() != self.order || ctx.slot >= self.prompt_slots {
            return Err(Error::invariant("context", format!("{ctx:?} does not fit this policy")));
        }
        self.rows.insert(ctx, logits);
        Ok(())
    }

    pub fn rows(&self) -> impl Iterator<Item = (&Context, &[f64])> {
        self.rows.iter().map(|(c, r)| (c, r.as_slice()))
    }

    /// Every context reachable from the start state.
    pub fn all_contexts(&self) -> Vec<Context> {
        let v = self.vocab.len() as u32;
        let mut out = Vec::new();
        for slot in 0..self.prompt_slots {
            let n = (v as usize).pow(self.order as u32);
            for mut idx in 0..n {
                let mut tokens = vec![0u32; self.order];
                for t in tokens.iter_mut().rev() {
                    *t = (idx % v as usize) as u32;
                    idx /= v as usize;
                }
                out.push(Context { slot, tokens });
            }
        }
        out
    }

    /// `softmax(logits / T)` for one context.
    pub fn probs(&self, ctx: &Context, temperature: f64) -> Vec<f64> {
        softmax(&self.logits(ctx), temperature)
    }

    /// Sum of per-token `log softmax(logits / T)` along the trajectory.
    pub fn sequence_logprob(&self, prompt_id: &str, tokens: &[u32], temperature: f64) -> Result<f64> {
        Ok(self.token_logprobs(prompt_id, tokens, temperature)?.iter().sum())
    }

    pub fn token_logprobs(&self, prompt_id: &str, tokens: &[u32], temperature: f64) -> Result<Vec<f64>> {
        self.check_tokens(tokens)?;
        Ok(self
            .contexts(prompt_id, tokens)
            .iter()
            .zip(tokens)
            .map(|(ctx, &t)| log_softmax(&self.logits(ctx), temperature)[t as usize])
            .collect())
    }

    fn check_tokens(&self, tokens: &[u32]) -> Result<()> {
        match tokens.iter().find(|&&t| t as usize >= self.vocab.len()) {
            Some(&bad) => Err(Error::UnknownToken(bad)),
            None => Ok(()),
        }
    }

    /// `logits += learning_rate · gradient`. Nothing is modified when the
    /// result would be non-finite.
    pub fn apply_update(&mut self, gradient: &Gradient, learning_rate: f64) -> Result<()> {
        let mut staged = Vec::with_capacity(gradient.rows.len());
        for (ctx, g) in &gradient.rows {
            if g.len() != self.vocab.len() {
                return Err(Error::LengthMismatch {
                    what: "gradient row vs vocab",
                    left: g.len(),
                    right: self.vocab.len(),
                });
            }
            let mut row = self.logits(ctx).into_owned();
            for (x, d) in row.iter_mut().zip(g) {
                *x += learning_rate * d;
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("policy update".into()));
            }
            staged.push((ctx.clone(), row));
        }
        if learning_rate == 0.0 {
            return Ok(());
        }
        for (ctx, row) in staged {
            self.rows.insert(ctx, row);
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> PolicyCheckpoint {
        PolicyCheckpoint {
            vocab: self.vocab.tokens.clone(),
            order: self.order,
            prompt_slots: self.prompt_slots,
            rows: self.rows.iter().map(|(c, r)| (c.key(), r.clone())).collect(),
        }
    }

    pub fn from_checkpoint(ckpt: PolicyCheckpoint) -> Result<Self> {
        let mut policy = Self::new(Vocab::from_tokens(ckpt.vocab)?, ckpt.order, ckpt.prompt_slots)?;
        for (key, row) in ckpt.rows {
            let ctx = Context::from_key(&key, ckpt.order)?;
            policy.set_row(ctx, row)?;
        }
        Ok(policy)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(&self.to_checkpoint()).expect("serializable");
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: PolicyCheckpoint =
            serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        Self::from_checkpoint(ckpt)
    }
}

/// On-disk form of [`ToyPolicy`]. Row keys are `slot|t1,t2,…`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub vocab: Vec<String>,
    pub order: usize,
    pub prompt_slots: u32,
    pub rows: BTreeMap<String, Vec<f64>>,
}

pub fn log_softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = logits.iter().map(|x| x / temperature).collect();
    let m = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + scaled.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    scaled.iter().map(|x| x - lse).collect()
}

pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = logits.iter().map(|x| x / temperature).collect();
    let m = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}
