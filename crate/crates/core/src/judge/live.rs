use std::fmt;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatRequest, Judge, JudgeError};

/// Connection settings for an OpenAI-compatible chat-completion server.
#[derive(Clone)]
pub struct JudgeEndpoint {
    pub base_url: String,
    pub model_name: String,
    pub api_key: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// First retry delay; doubles on each further attempt.
    pub backoff: Duration,
}

impl fmt::Debug for JudgeEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JudgeEndpoint")
            .field("base_url", &self.base_url)
            .field("model_name", &self.model_name)
            .field("api_key", &"<redacted>")
            .field("timeout", &self.timeout)
            .field("max_retries", &self.max_retries)
            .field("max_in_flight", &self.max_in_flight)
            .finish()
    }
}

impl JudgeEndpoint {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key: api_key.into(),
            timeout: Duration::from_secs(120),
            max_retries: 3,
            max_in_flight: 4,
            backoff: Duration::from_millis(500),
        }
    }

    /// Reads `JUDGE_ENDPOINT`, `JUDGE_MODEL`, `JUDGE_API_KEY` and
    /// `JUDGE_TIMEOUT_SECS`.
    pub fn from_env() -> Result<Self, JudgeError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let base = var("JUDGE_ENDPOINT").ok_or_else(|| JudgeError::Config("JUDGE_ENDPOINT is not set".into()))?;
        let model = var("JUDGE_MODEL").ok_or_else(|| JudgeError::Config("JUDGE_MODEL is not set".into()))?;
        let mut e = Self::new(base, model, var("JUDGE_API_KEY").unwrap_or_default());
        if let Some(t) = var("JUDGE_TIMEOUT_SECS") {
            let secs: f64 = t
                .parse()
                .map_err(|_| JudgeError::Config(format!("JUDGE_TIMEOUT_SECS: not a number: {t:?}")))?;
            if !(secs > 0.0 && secs.is_finite()) {
                return Err(JudgeError::Config("JUDGE_TIMEOUT_SECS must be positive".into()));
            }
            e.timeout = Duration::from_secs_f64(secs);
        }
        Ok(e)
    }

    pub fn validate(&self) -> Result<(), JudgeError> {
        if self.timeout.is_zero() {
            return Err(JudgeError::Config("timeout must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(JudgeError::Config("max_in_flight must be at least 1".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(JudgeError::Config(format!(
                "base_url must be http(s): {}",
                self.base_url
            )));
        }
        Ok(())
    }

    fn url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Reply,
}

#[derive(Deserialize)]
struct Reply {
    content: Option<String>,
}

/// Judge backed by a remote chat-completion endpoint.
pub struct LiveJudge {
    endpoint: JudgeEndpoint,
    client: reqwest::blocking::Client,
    slots: Semaphore,
}

enum Attempt {
    Retry(String),
    Fail(JudgeError),
}

impl LiveJudge {
    pub fn new(endpoint: JudgeEndpoint) -> Result<Self, JudgeError> {
        endpoint.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(endpoint.timeout)
            .build()
            .map_err(|e| JudgeError::Config(format!("http client: {e}")))?;
        let slots = Semaphore::new(endpoint.max_in_flight);
        Ok(Self {
            endpoint,
            client,
            slots,
        })
    }

    pub fn endpoint(&self) -> &JudgeEndpoint {
        &self.endpoint
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, Attempt> {
        let mut req = self.client.post(self.endpoint.url()).json(body);
        if !self.endpoint.api_key.is_empty() {
            req = req.bearer_auth(&self.endpoint.api_key);
        }
        let resp = req.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        log::debug!("judge response ({status}): {text}");
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fail(JudgeError::Http {
                status: status.as_u16(),
                body: text,
            }));
        }
        let parsed: Completion = serde_json::from_str(&text).map_err(|e| {
            Attempt::Fail(JudgeError::Unparseable {
                reason: format!("completion body: {e}"),
                raw: text.clone(),
            })
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| {
                Attempt::Fail(JudgeError::Unparseable {
                    reason: "no message content".into(),
                    raw: text,
                })
            })
    }
}

impl Judge for LiveJudge {
    fn name(&self) -> &str {
        "live"
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, JudgeError> {
        let body = json!({
            "model": self.endpoint.model_name,
            "messages": request.messages,
            "temperature": 0.0,
        });
        log::debug!(
            "judge request to {} (Authorization: Bearer <redacted>): {body}",
            self.endpoint.url()
        );
        let _permit = self.slots.acquire();
        let mut last = String::new();
        for attempt in 0..=self.endpoint.max_retries {
            if attempt > 0 {
                let delay = self.endpoint.backoff * 2u32.saturating_pow(attempt - 1);
                log::warn!("judge attempt {attempt} failed ({last}); retrying in {delay:?}");
                std::thread::sleep(delay);
            }
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fail(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(JudgeError::Transport {
            attempts: self.endpoint.max_retries + 1,
            message: last,
        })
    }
}
