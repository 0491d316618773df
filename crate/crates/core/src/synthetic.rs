//! Synthetic prose and preference pairs labeled by a hidden linear scorer.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::rewards::{extract_features, PreferencePair, FEATURE_DIM};

/// Weights of the hidden scorer over the writing features.
pub const HIDDEN_WEIGHTS: [f64; FEATURE_DIM] = [0.6, 0.5, 3.0, -0.8, -4.0, 0.9, 1.5];

pub fn hidden_score(text: &str) -> f64 {
    extract_features(text)
        .iter()
        .zip(HIDDEN_WEIGHTS)
        .map(|(x, w)| x * w)
        .sum()
}

const LETTERS: &[u8] = b"etaoinshrdlucmfwypvbgk";
const PUNCT: [&str; 3] = [".", "!", "?"];
const INNER: [&str; 4] = [",", ";", ":", " -"];

fn word<R: Rng>(rng: &mut R, mean_len: f64) -> String {
    let len = ((mean_len + rng.gen_range(-2.0..2.0)).round() as usize).clamp(1, 14);
    (0..len)
        .map(|_| LETTERS[rng.gen_range(0..LETTERS.len())] as char)
        .collect()
}

/// A random multi-paragraph text whose style knobs (word length, lexical
/// variety, sentence length, paragraphing, punctuation, duplicated
/// sentences) vary from call to call.
pub fn synthetic_text<R: Rng>(rng: &mut R) -> String {
    let mean_len = rng.gen_range(2.5..8.0);
    let lexicon: Vec<String> = (0..rng.gen_range(4..80)).map(|_| word(rng, mean_len)).collect();
    let sentence_len = rng.gen_range(3..25);
    let paragraphs = rng.gen_range(1..6);
    let sentences_per = rng.gen_range(1..6);
    let inner_rate = rng.gen_range(0.0..0.3);
    let dup_rate = rng.gen_range(0.0..0.5);
    let mut out = Vec::new();
    let mut previous: Vec<String> = Vec::new();
    for _ in 0..paragraphs {
        let mut para = Vec::new();
        for _ in 0..sentences_per {
            if !previous.is_empty() && rng.gen_bool(dup_rate) {
                para.push(previous.choose(rng).expect("non-empty").clone());
                continue;
            }
            let n = (sentence_len as i64 + rng.gen_range(-2..=2)).max(1) as usize;
            let mut s = String::new();
            for k in 0..n {
                if k > 0 {
                    s.push(' ');
                }
                s.push_str(lexicon.choose(rng).expect("non-empty"));
                if k + 1 < n && rng.gen_bool(inner_rate) {
                    s.push_str(INNER.choose(rng).expect("non-empty"));
                }
            }
            s.push_str(PUNCT.choose(rng).expect("non-empty"));
            previous.push(s.clone());
            para.push(s);
        }
        out.push(para.join(" "));
    }
    out.join("\n\n")
}

/// `n` pairs of independent random texts, the higher hidden score chosen.
pub fn synthetic_pairs(n: usize, seed: u64) -> Vec<PreferencePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n);
    while pairs.len() < n {
        let x = synthetic_text(&mut rng);
        let y = synthetic_text(&mut rng);
        let (sx, sy) = (hidden_score(&x), hidden_score(&y));
        if sx == sy {
            continue;
        }
        let (chosen, rejected) = if sx > sy { (x, y) } else { (y, x) };
        let prompt = format!("synthetic prompt {}", pairs.len());
        pairs.push(PreferencePair {
            prompt,
            chosen,
            rejected,
        });
    }
    pairs
}
