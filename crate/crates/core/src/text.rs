//! Word counting, sentence splitting and shingle similarity.
//!
//! A "word" is a maximal run of non-whitespace, non-CJK characters, and every
//! CJK codepoint (Han, kana, Hangul syllables) counts as one word on its own.
//! CJK punctuation separates words without counting.

use std::collections::HashSet;

pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2FA1F
        | 0x3040..=0x309F
        | 0x30A0..=0x30FF
        | 0x31F0..=0x31FF
        | 0xAC00..=0xD7AF)
}

fn is_cjk_punct(c: char) -> bool {
    matches!(c as u32,
        0x3000..=0x303F
        | 0xFF01..=0xFF0F
        | 0xFF1A..=0xFF20
        | 0xFF3B..=0xFF40
        | 0xFF5B..=0xFF65)
}

pub fn word_count(text: &str) -> u32 {
    let mut count = 0u32;
    let mut in_token = false;
    for c in text.chars() {
        if is_cjk(c) {
            count += 1;
            in_token = false;
        } else if c.is_whitespace() || is_cjk_punct(c) {
            in_token = false;
        } else if !in_token {
            count += 1;
            in_token = true;
        }
    }
    count
}

const SENTENCE_ENDINGS: [char; 6] = ['.', '!', '?', '。', '！', '？'];

/// Splits on sentence-final punctuation, trims, and drops empty pieces.
pub fn split_sentences(text: &str) -> Vec<&str> {
    text.split(|c| SENTENCE_ENDINGS.contains(&c))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Character k-shingles. Text shorter than `k` characters yields itself as a
/// single shingle so that short sentences can still be compared.
pub fn char_shingles(text: &str, k: usize) -> HashSet<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return HashSet::new();
    }
    if chars.len() <= k {
        return std::iter::once(text.to_string()).collect();
    }
    chars.windows(k).map(|w| w.iter().collect()).collect()
}

pub fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Paragraphs are separated by at least one blank line.
pub fn paragraph_count(text: &str) -> u32 {
    let mut count = 0;
    let mut in_para = false;
    for line in text.lines() {
        if line.trim().is_empty() {
            in_para = false;
        } else if !in_para {
            count += 1;
            in_para = true;
        }
    }
    count
}

/// Words as counted by [`word_count`], returned as owned strings.
pub fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if is_cjk(c) {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            out.push(c.to_string());
        } else if c.is_whitespace() || is_cjk_punct(c) {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push(c);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}
