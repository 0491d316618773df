//! Named policy initializers.

use super::{Context, ToyPolicy, Vocab};
use crate::error::Result;
use crate::registry::Registry;
use crate::structure::{ANSWER_CLOSE, ANSWER_OPEN, THINK_CLOSE, THINK_OPEN};

/// Word tokens of the demo vocabulary, in their "reading order".
pub const DEMO_WORDS: [&str; 15] = [
    "the", "river", "bends", "past", "old", "stone", "walls", "and", "quiet", "fields", "under", "a", "pale",
    "morning", "sky",
];

#[derive(Debug, Clone)]
pub struct PolicyInitParams {
    pub words: Vec<String>,
    pub order: usize,
    pub prompt_slots: u32,
}

impl Default for PolicyInitParams {
    fn default() -> Self {
        Self {
            words: DEMO_WORDS.iter().map(|s| s.to_string()).collect(),
            order: 1,
            prompt_slots: 1,
        }
    }
}

pub type PolicyInitRegistry = Registry<ToyPolicy, PolicyInitParams>;

/// `uniform`: every row zero. `grammar-prior`: a weak base-model prior
/// described on [`grammar_prior`].
pub fn policy_init_registry() -> PolicyInitRegistry {
    let mut reg = PolicyInitRegistry::new("policy initializer");
    reg.register("uniform", |p: &PolicyInitParams| {
        ToyPolicy::new(Vocab::with_words(&p.words)?, p.order, p.prompt_slots)
    });
    reg.register("grammar-prior", grammar_prior);
    reg
}

/// A first-order "base model": it knows the tags exist and that words tend
/// to follow each other in reading order, but it closes segments early and
/// often breaks the grammar. Contexts use only the most recent token, so the
/// prior is the same for every `order`.
pub fn grammar_prior(p: &PolicyInitParams) -> Result<ToyPolicy> {
    let vocab = Vocab::with_words(&p.words)?;
    let mut policy = ToyPolicy::new(vocab.clone(), p.order, p.prompt_slots)?;
    let id = |t: &str| vocab.id(t).expect("structural token") as usize;
    let (t_open, t_close, a_open, a_close, eos) = (
        id(THINK_OPEN),
        id(THINK_CLOSE),
        id(ANSWER_OPEN),
        id(ANSWER_CLOSE),
        vocab.eos() as usize,
    );
    let words: Vec<usize> = p.words.iter().map(|w| id(w)).collect();
    let v = vocab.len();

    let row_for = |prev: usize| -> Vec<f64> {
        let mut row = vec![0.0; v];
        if prev == eos {
            row[t_open] = 3.0;
            row[a_open] = 1.0;
        } else if prev == t_open {
            row[t_close] = 2.5;
        } else if prev == t_close {
            row[a_open] = 3.0;
        } else if prev == a_open {
            row[words[0]] = 1.5;
        } else if prev == a_close {
            row[eos] = 3.0;
        } else if let Some(k) = words.iter().position(|&w| w == prev) {
            row[prev] = 1.5;
            if let Some(&next) = words.get(k + 1) {
                row[next] = 1.5;
            }
            row[a_close] = 1.0;
            row[t_open] = -1.0;
            row[a_open] = -1.0;
        }
        row
    };

    for ctx in policy.all_contexts() {
        let prev = *ctx.tokens.last().unwrap_or(&(eos as u32)) as usize;
        let row = row_for(prev);
        policy.set_row(
            Context {
                slot: ctx.slot,
                tokens: ctx.tokens,
            },
            row,
        )?;
    }
    Ok(policy)
}
