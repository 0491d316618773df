use super::explicit::explicit_length_range;
use super::{ChatRequest, Judge, JudgeError, JudgeTask};
use crate::rewards::length_reward;
use crate::text::{word_count, words};
use crate::types::{WordRange, DEFAULT_LENGTH_CAP};

/// Deterministic offline judge built from keyword heuristics. It answers
/// the structured protocols only, never free-form requests.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleJudge;

const NOT_WRITING: [&str; 10] = [
    "translate",
    "calculate",
    "compute",
    "solve",
    "convert",
    "what is",
    "define",
    "fix",
    "debug",
    "how many",
];

const FORMS: [(&[&str], (u32, u32)); 5] = [
    (&["tweet", "weibo", "note", "caption", "slogan"], (0, 300)),
    (&["blog", "letter", "email", "poem"], (300, 800)),
    (&["essay", "speech", "story"], (800, 1200)),
    (&["report", "article", "review"], (1200, 2500)),
    (&["thesis", "proposal", "business plan", "novel"], (4000, 7000)),
];

fn heuristic_range(query: &str) -> WordRange {
    if let Some(r) = explicit_length_range(query) {
        return r;
    }
    let q = query.to_lowercase();
    for (keys, (lo, hi)) in FORMS.iter().rev() {
        if keys.iter().any(|k| q.contains(k)) {
            return WordRange::new(*lo, *hi);
        }
    }
    WordRange::new(300, 800)
}

fn is_writing(query: &str) -> bool {
    let q = query.trim().to_lowercase();
    !NOT_WRITING.iter().any(|k| q.starts_with(k))
}

/// Length fit against the heuristic range plus lexical variety, in [0, 2].
fn quality(prompt: &str, text: &str) -> f64 {
    let spec = heuristic_range(prompt)
        .with_cap(DEFAULT_LENGTH_CAP)
        .expect("heuristic range is valid");
    let fit = length_reward(word_count(text), &spec);
    let ws: Vec<String> = words(text).into_iter().map(|w| w.to_lowercase()).collect();
    let variety = if ws.is_empty() {
        0.0
    } else {
        ws.iter().collect::<std::collections::BTreeSet<_>>().len() as f64 / ws.len() as f64
    };
    fit + variety
}

impl Judge for RuleJudge {
    fn name(&self) -> &str {
        "rules"
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, JudgeError> {
        match &request.task {
            JudgeTask::TaskSelection { query } => Ok(if is_writing(query) {
                let r = heuristic_range(query);
                format!("{{\"range\": [{}, {}]}}", r.lower, r.upper)
            } else {
                "NotWriting".to_string()
            }),
            JudgeTask::LengthRange { query } => {
                let r = heuristic_range(query);
                Ok(format!("{{\"range\": [{}, {}]}}", r.lower, r.upper))
            }
            JudgeTask::Pairwise { prompt, a, b } => {
                let d = quality(prompt, a) - quality(prompt, b);
                let marker = if d > 0.5 {
                    "[[A>>B]]"
                } else if d > 0.05 {
                    "[[A>B]]"
                } else if d < -0.5 {
                    "[[B>>A]]"
                } else if d < -0.05 {
                    "[[B>A]]"
                } else {
                    "[[A=B]]"
                };
                Ok(format!(
                    "Rule-based comparison (score difference {d:.3}). My final verdict is {marker}"
                ))
            }
            JudgeTask::Other => Err(JudgeError::Config(
                "rule judge only answers the built-in protocols".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{
        classify_writing_task, pairwise_judge, predict_length_range, LengthPrediction, TaskClass, Verdict,
    };
    use super::*;

    #[test]
    fn classification() {
        let j = RuleJudge;
        assert_eq!(
            classify_writing_task("Translate “Seize the day” into Spanish.", &j).unwrap(),
            TaskClass::NotWriting
        );
        assert_eq!(
            classify_writing_task(
                "Write a Weibo post titled “Tips for Preparing for College Final Exams.”",
                &j
            )
            .unwrap(),
            TaskClass::Writing(WordRange::new(0, 300))
        );
        assert_eq!(
            predict_length_range("write a 2,000-word essay", &j).unwrap(),
            LengthPrediction::Range {
                range: WordRange::new(1800, 2200),
                warnings: vec![]
            }
        );
    }

    #[test]
    fn pairwise_prefers_fitting_length() {
        let j = RuleJudge;
        let long: String = (0..400).map(|i| format!("w{i} ")).collect();
        let v = pairwise_judge("Write a short blog post", &long, "too short", &j).unwrap();
        assert_eq!(v, Verdict::AMuchBetter);
        assert_eq!(
            pairwise_judge("Write a short blog post", "same", "same", &j).unwrap(),
            Verdict::Tie
        );
    }
}
