//! Chat-completion backends.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Clone, Copy)]
pub struct ChatRequest<'a> {
    pub model: &'a str,
    pub temperature: f64,
    pub prompt: &'a str,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("backend: {0}")]
pub struct BackendError(pub String);

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError>;

    fn name(&self) -> &str;
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

pub const API_KEY_ENV: &str = "SARA_LLM_API_KEY";

/// OpenAI-style `/chat/completions` client.
pub struct HttpBackend {
    endpoint: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    /// Reads the key from `SARA_LLM_API_KEY`.
    pub fn from_env(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| BackendError(format!("{API_KEY_ENV} is not set")))?;
        Ok(Self::new(endpoint, key, timeout))
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        let body = json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let resp: Value = self
            .agent
            .post(&self.endpoint)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(|e| BackendError(e.to_string()))?
            .into_json()
            .map_err(|e| BackendError(format!("unreadable response body: {e}")))?;
        resp["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| BackendError("response has no choices[0].message.content".into()))
    }

    fn name(&self) -> &str {
        "http"
    }
}

/// Wraps a backend and deletes every tenth `id,label` row of each response,
/// i.e. floor(10%) of the rows.
pub struct DropRows<B> {
    inner: B,
    every: usize,
    calls: AtomicUsize,
}

impl<B> DropRows<B> {
    pub fn tenth(inner: B) -> Self {
        Self {
            inner,
            every: 10,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<B: ChatBackend> ChatBackend for DropRows<B> {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let text = self.inner.complete(request)?;
        let mut row = 0usize;
        let kept: Vec<&str> = text
            .lines()
            .filter(|l| {
                if !l.contains(',') {
                    return true;
                }
                row += 1;
                row % self.every != 0
            })
            .collect();
        Ok(kept.join("\n"))
    }

    fn name(&self) -> &str {
        "drop-rows"
    }
}
