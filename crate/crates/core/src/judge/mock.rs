use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChatRequest, Judge, JudgeError};
use crate::error::{Error, Result};

/// Key that matches any request without its own entry.
pub const WILDCARD: &str = "*";

/// One line of a mock script: a canned reply or a scripted failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptLine {
    pub request_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ScriptLine {
    pub fn reply(request: &ChatRequest, reply: impl Into<String>) -> Self {
        Self {
            request_hash: request.hash(),
            reply: Some(reply.into()),
            error: None,
        }
    }

    pub fn failure(request: &ChatRequest, error: impl Into<String>) -> Self {
        Self {
            request_hash: request.hash(),
            reply: None,
            error: Some(error.into()),
        }
    }

    pub fn fallback(reply: impl Into<String>) -> Self {
        Self {
            request_hash: WILDCARD.into(),
            reply: Some(reply.into()),
            error: None,
        }
    }
}

/// Offline judge answering from a request-hash → reply table.
#[derive(Debug, Clone, Default)]
pub struct MockJudge {
    script: HashMap<String, Result<String, String>>,
}

impl MockJudge {
    pub fn new(lines: impl IntoIterator<Item = ScriptLine>) -> Result<Self> {
        let mut script = HashMap::new();
        for (i, line) in lines.into_iter().enumerate() {
            let entry = match (line.reply, line.error) {
                (Some(r), None) => Ok(r),
                (None, Some(e)) => Err(e),
                _ => {
                    return Err(Error::parse(
                        format!("script entry {}", i + 1),
                        "exactly one of `reply` and `error` is required",
                    ))
                }
            };
            script.insert(line.request_hash, entry);
        }
        Ok(Self { script })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(crate::io::read_jsonl::<ScriptLine>(path)?)
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }
}

impl Judge for MockJudge {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, JudgeError> {
        let hash = request.hash();
        match self.script.get(&hash).or_else(|| self.script.get(WILDCARD)) {
            Some(Ok(reply)) => Ok(reply.clone()),
            Some(Err(e)) => Err(JudgeError::Scripted(e.clone())),
            None => Err(JudgeError::Unscripted { hash }),
        }
    }
}
