//! Chat-completion judges and the three judging protocols: writing-task
//! selection, length-range prediction and pairwise comparison.

mod explicit;
mod live;
mod mock;
mod parse;
pub mod prompts;
mod rules;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use explicit::{explicit_length_range, explicit_length_rule};
pub use live::{JudgeEndpoint, LiveJudge};
pub use mock::{MockJudge, ScriptLine};
pub use parse::{bound_rule_warnings, parse_range, parse_task_class, parse_verdict, TaskClass, Verdict};
pub use rules::RuleJudge;

use crate::error::Result;
use crate::registry::Registry;
use crate::types::{LengthSpec, PromptSpec, WordRange};

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("judge transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("judge returned HTTP {status}: {body}")]
    Http { status: u16, body: String },

    #[error("unparseable judge output ({reason}): {raw:?}")]
    Unparseable { reason: String, raw: String },

    #[error("mock judge has no reply for request {hash}")]
    Unscripted { hash: String },

    #[error("scripted judge failure: {0}")]
    Scripted(String),

    #[error("judge configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// What a request asks for; lets offline judges answer without parsing the
/// rendered prompt. Not sent over the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JudgeTask {
    TaskSelection { query: String },
    LengthRange { query: String },
    Pairwise { prompt: String, a: String, b: String },
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub task: JudgeTask,
}

impl ChatRequest {
    pub fn task_selection(query: &str) -> Self {
        Self {
            messages: vec![ChatMessage::user(prompts::task_selection(query))],
            task: JudgeTask::TaskSelection { query: query.into() },
        }
    }

    pub fn length_range(query: &str) -> Self {
        Self {
            messages: vec![ChatMessage::user(prompts::length_assessment(query))],
            task: JudgeTask::LengthRange { query: query.into() },
        }
    }

    pub fn pairwise(prompt: &str, a: &str, b: &str) -> Self {
        Self {
            messages: vec![
                ChatMessage::system(prompts::PAIRWISE_SYSTEM),
                ChatMessage::user(prompts::pairwise_user(prompt, a, b)),
            ],
            task: JudgeTask::Pairwise {
                prompt: prompt.into(),
                a: a.into(),
                b: b.into(),
            },
        }
    }

    /// Hex SHA-256 of the JSON-encoded message list; keys mock scripts.
    pub fn hash(&self) -> String {
        let body = serde_json::to_vec(&self.messages).expect("messages serialize");
        hex::encode(Sha256::digest(body))
    }
}

pub trait Judge: Send + Sync {
    fn name(&self) -> &str;

    /// Raw text of the judge's reply.
    fn complete(&self, request: &ChatRequest) -> Result<String, JudgeError>;
}

pub fn classify_writing_task(query: &str, judge: &dyn Judge) -> Result<TaskClass, JudgeError> {
    parse_task_class(&judge.complete(&ChatRequest::task_selection(query))?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LengthPrediction {
    Range { range: WordRange, warnings: Vec<String> },
    Unfulfillable,
}

pub fn predict_length_range(query: &str, judge: &dyn Judge) -> Result<LengthPrediction, JudgeError> {
    let range = parse_range(&judge.complete(&ChatRequest::length_range(query))?)?;
    if range.is_degenerate() {
        return Ok(LengthPrediction::Unfulfillable);
    }
    let warnings = bound_rule_warnings(range);
    for w in &warnings {
        log::warn!("length range for {query:?}: {w}");
    }
    Ok(LengthPrediction::Range { range, warnings })
}

pub fn pairwise_judge(prompt: &str, a: &str, b: &str, judge: &dyn Judge) -> Result<Verdict, JudgeError> {
    parse_verdict(&judge.complete(&ChatRequest::pairwise(prompt, a, b))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecSource {
    Given,
    Explicit,
    Judge,
    Default,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Spec {
        spec: LengthSpec,
        source: SpecSource,
    },
    /// The judge said no reasonable range exists; the prompt is dropped.
    Dropped,
}

/// Length spec for training: one already on the prompt, then an explicit
/// count in the text, then the judge, then `default` with a warning.
pub fn resolve_length_spec(
    prompt: &PromptSpec,
    judge: Option<&dyn Judge>,
    default: WordRange,
    cap: u32,
) -> Result<Resolution> {
    if let Some(spec) = prompt.length_spec {
        return Ok(Resolution::Spec {
            spec,
            source: SpecSource::Given,
        });
    }
    if let Some(r) = explicit_length_range(&prompt.text) {
        return Ok(Resolution::Spec {
            spec: r.with_cap(cap)?,
            source: SpecSource::Explicit,
        });
    }
    if let Some(j) = judge {
        match predict_length_range(&prompt.text, j) {
            Ok(LengthPrediction::Unfulfillable) => return Ok(Resolution::Dropped),
            Ok(LengthPrediction::Range { range, .. }) => {
                return Ok(Resolution::Spec {
                    spec: range.with_cap(cap)?,
                    source: SpecSource::Judge,
                });
            }
            Err(e) => log::warn!("prompt `{}`: judge failed ({e}); using default range", prompt.id),
        }
    } else {
        log::warn!(
            "prompt `{}`: no explicit length and no judge; using default [{}, {}]",
            prompt.id,
            default.lower,
            default.upper
        );
    }
    Ok(Resolution::Spec {
        spec: default.with_cap(cap)?,
        source: SpecSource::Default,
    })
}

/// Resolves every prompt, dropping unfulfillable ones.
pub fn resolve_all(
    prompts: Vec<PromptSpec>,
    judge: Option<&dyn Judge>,
    default: WordRange,
    cap: u32,
) -> Result<Vec<PromptSpec>> {
    let mut out = Vec::with_capacity(prompts.len());
    for p in prompts {
        match resolve_length_spec(&p, judge, default, cap)? {
            Resolution::Spec { spec, .. } => out.push(p.with_length_spec(spec)),
            Resolution::Dropped => log::warn!("prompt `{}` dropped: judged unfulfillable", p.id),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct JudgeParams {
    pub script: Option<PathBuf>,
    pub endpoint: Option<JudgeEndpoint>,
}

pub type JudgeRegistry = Registry<Arc<dyn Judge>, JudgeParams>;

/// `mock` (needs a script), `live` (endpoint or env vars), `rules`.
pub fn judge_registry() -> JudgeRegistry {
    let mut reg = JudgeRegistry::new("judge");
    reg.register("mock", |p: &JudgeParams| {
        let path = p
            .script
            .as_ref()
            .ok_or_else(|| JudgeError::Config("mock judge needs a script path (mock:<path>)".into()))?;
        Ok(Arc::new(MockJudge::load(path)?) as Arc<dyn Judge>)
    });
    reg.register("live", |p: &JudgeParams| {
        let endpoint = match &p.endpoint {
            Some(e) => e.clone(),
            None => JudgeEndpoint::from_env()?,
        };
        Ok(Arc::new(LiveJudge::new(endpoint)?) as Arc<dyn Judge>)
    });
    reg.register("rules", |_: &JudgeParams| Ok(Arc::new(RuleJudge) as Arc<dyn Judge>));
    reg
}

/// Builds a judge from a flag value such as `mock:script.jsonl`, `live` or
/// `rules`.
pub fn judge_from_spec(spec: &str) -> Result<Arc<dyn Judge>> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    let params = JudgeParams {
        script: arg.map(PathBuf::from),
        endpoint: None,
    };
    judge_registry().create(name, &params)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(&'static str);

    impl Judge for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }

        fn complete(&self, _: &ChatRequest) -> Result<String, JudgeError> {
            Ok(self.0.to_string())
        }
    }

    #[test]
    fn hash_depends_only_on_messages() {
        let a = ChatRequest::pairwise("p", "x", "y");
        let mut b = a.clone();
        b.task = JudgeTask::Other;
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), ChatRequest::pairwise("p", "y", "x").hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn predictions() {
        let j = Fixed("{\"range\": [6000, 10000]}");
        match predict_length_range("Complete an academic paper on green cities", &j).unwrap() {
            LengthPrediction::Range { range, warnings } => {
                assert_eq!(range, WordRange::new(6000, 10000));
                assert_eq!(warnings.len(), 1);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            predict_length_range("Analyze a project's prospects", &Fixed("{\"range\": [0, 0]}")).unwrap(),
            LengthPrediction::Unfulfillable
        );
        assert_eq!(
            classify_writing_task("Translate “Seize the day” into Spanish.", &Fixed("NotWriting")).unwrap(),
            TaskClass::NotWriting
        );
        assert_eq!(
            pairwise_judge("p", "a", "b", &Fixed("My final verdict is tie: [[A=B]]")).unwrap(),
            Verdict::Tie
        );
    }

    #[test]
    fn resolution_order() {
        let default = WordRange::new(300, 1200);
        let judge = Fixed("{\"range\": [800, 1000]}");
        let p = PromptSpec::new("a", "write a 2,000-word essay").unwrap();
        match resolve_length_spec(&p, Some(&judge), default, 13_000).unwrap() {
            Resolution::Spec { spec, source } => {
                assert_eq!(source, SpecSource::Explicit);
                assert_eq!((spec.lower(), spec.upper()), (1800, 2200));
            }
            other => panic!("{other:?}"),
        }
        let p = PromptSpec::new("b", "Write a high school essay").unwrap();
        assert!(matches!(
            resolve_length_spec(&p, Some(&judge), default, 13_000).unwrap(),
            Resolution::Spec {
                source: SpecSource::Judge,
                ..
            }
        ));
        assert!(matches!(
            resolve_length_spec(&p, None, default, 13_000).unwrap(),
            Resolution::Spec {
                source: SpecSource::Default,
                ..
            }
        ));
        let broken = Fixed("???");
        assert!(matches!(
            resolve_length_spec(&p, Some(&broken), default, 13_000).unwrap(),
            Resolution::Spec {
                source: SpecSource::Default,
                ..
            }
        ));
        let kept = resolve_all(vec![p.clone()], Some(&Fixed("{\"range\": [0, 0]}")), default, 13_000).unwrap();
        assert!(kept.is_empty());
    }

    #[test]
    fn spec_strings() {
        assert!(judge_from_spec("rules").is_ok());
        assert!(judge_from_spec("mock").is_err());
        let err = judge_from_spec("oracle").err().unwrap().to_string();
        assert!(
            err.contains("live") && err.contains("mock") && err.contains("rules"),
            "{err}"
        );
    }
}
