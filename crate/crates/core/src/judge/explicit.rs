use std::sync::OnceLock;

use regex::Regex;

use crate::types::{LengthSpec, WordRange, DEFAULT_LENGTH_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Exact,
    AtMost,
    AtLeast,
}

fn count_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?ix)
            (?P<q>no\s+more\s+than|not\s+more\s+than|not\s+exceed(?:ing)?|at\s+most|up\s+to|
                  maximum\s+of|under|less\s+than|fewer\s+than|within|
                  at\s+least|no\s+less\s+than|no\s+fewer\s+than|minimum\s+of|more\s+than|over|
                  不超过|不多于|最多|至少|不少于|超过)?
            \s*
            (?P<n>\d{1,3}(?:,\d{3})+|\d+)
            \s*-?\s*
            (?P<unit>words?\b|字)
            (?P<suffix>以内|以下|以上)?",
        )
        .unwrap()
    })
}

fn bound_of(qualifier: Option<&str>, suffix: Option<&str>) -> Bound {
    match suffix {
        Some("以内") | Some("以下") => return Bound::AtMost,
        Some("以上") => return Bound::AtLeast,
        _ => {}
    }
    let Some(q) = qualifier else {
        return Bound::Exact;
    };
    let q = q.to_lowercase();
    let q: String = q.split_whitespace().collect::<Vec<_>>().join(" ");
    match q.as_str() {
        "at least" | "no less than" | "no fewer than" | "minimum of" | "more than" | "over" | "至少" | "不少于"
        | "超过" => Bound::AtLeast,
        _ => Bound::AtMost,
    }
}

/// The range implied by the first explicit word count in `query`:
/// `N` → [0.9N, 1.1N], "no more than N" → [0.9N, N], "at least N" → [N, 1.1N].
pub fn explicit_length_range(query: &str) -> Option<WordRange> {
    for caps in count_re().captures_iter(query) {
        let n: u64 = caps["n"].replace(',', "").parse().ok()?;
        if n == 0 || n > u64::from(u32::MAX) / 2 {
            continue;
        }
        let lo = ((9 * n + 5) / 10) as u32;
        let hi = ((11 * n + 5) / 10) as u32;
        let n = n as u32;
        let range = match bound_of(
            caps.name("q").map(|m| m.as_str()),
            caps.name("suffix").map(|m| m.as_str()),
        ) {
            Bound::Exact => WordRange::new(lo, hi),
            Bound::AtMost => WordRange::new(lo, n),
            Bound::AtLeast => WordRange::new(n, hi),
        };
        return Some(range);
    }
    None
}

/// [`explicit_length_range`] turned into a length spec with the default cap.
pub fn explicit_length_rule(query: &str) -> Option<LengthSpec> {
    explicit_length_range(query).and_then(|r| r.with_cap(DEFAULT_LENGTH_CAP).ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(q: &str) -> Option<(u32, u32)> {
        explicit_length_range(q).map(|r| (r.lower, r.upper))
    }

    #[test]
    fn worked_examples() {
        assert_eq!(r("write a 2,000-word essay"), Some((1800, 2200)));
        assert_eq!(r("no more than 2,000 words"), Some((1800, 2000)));
        assert_eq!(r("at least 2,000 words"), Some((2000, 2200)));
        assert_eq!(r("tell me about cats"), None);
        assert_eq!(r("Write 3000 words about rivers"), Some((2700, 3300)));
        assert_eq!(r("写一篇不少于800字的文章"), Some((800, 880)));
        assert_eq!(r("500字以内的短文"), Some((450, 500)));
        assert_eq!(r("In 2019 I wrote a story"), None);
        assert_eq!(r("0 words"), None);
    }

    #[test]
    fn spec_is_valid() {
        let s = explicit_length_rule("a 3000-word essay").unwrap();
        assert_eq!((s.lower(), s.upper(), s.max()), (2700, 3300, 13000));
        let big = explicit_length_rule("a 20,000-word novella").unwrap();
        assert!(big.upper() < big.max());
    }

    proptest! {
        #[test]
        fn always_a_valid_spec(n in 1u32..1_000_000, q in 0usize..3) {
            let prefix = ["", "no more than ", "at least "][q];
            let s = explicit_length_rule(&format!("{prefix}{n} words")).unwrap();
            prop_assert!(s.lower() <= s.upper() && s.upper() < s.max());
        }
    }
}
