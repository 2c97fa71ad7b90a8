//! HTTP embedding provider: `POST {base}/token_embeddings` with
//! `{"model", "text"}`, answered by `{"dim", "tokens", "states"}`.

use std::fmt;
use std::sync::Mutex;
use std::time::Duration;

use geovec_core::embed::{EmbedError, EmbeddingProvider, ProviderMode, TokenMatrix};
use geovec_core::prompt::Prompt;
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize)]
struct Request<'a> {
    model: &'a str,
    text: &'a str,
}

#[derive(Debug, Deserialize)]
struct Response {
    dim: usize,
    tokens: usize,
    states: Vec<Vec<f32>>,
}

pub const DEFAULT_RETRIES: u32 = 3;

/// Remote last-layer states. Requests are serialized; transient failures
/// (transport errors, HTTP 5xx and 429) are retried with exponential backoff.
pub struct RemoteProvider {
    base_url: String,
    model: String,
    dim: usize,
    retries: u32,
    backoff: Duration,
    agent: ureq::Agent,
    lock: Mutex<()>,
}

impl fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteProvider")
            .field("base_url", &self.base_url)
            .field("model", &self.model)
            .field("dim", &self.dim)
            .finish()
    }
}

enum Attempt {
    Retry(String),
    Fatal(EmbedError),
}

impl RemoteProvider {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, dim: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteProvider {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            dim,
            retries: DEFAULT_RETRIES,
            backoff: Duration::from_millis(200),
            agent,
            lock: Mutex::new(()),
        }
    }

    /// Delay before the first retry; doubles after each further failure.
    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff = base;
        self
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    fn attempt(&self, text: &str) -> Result<TokenMatrix, Attempt> {
        let url = format!("{}/token_embeddings", self.base_url);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(Request { model: &self.model, text })
            .map_err(|e| Attempt::Retry(format!("{url}: {e}")))?;
        let status = resp.status().as_u16();
        if status >= 500 || status == 429 {
            return Err(Attempt::Retry(format!("{url}: HTTP {status}")));
        }
        if status >= 400 {
            return Err(Attempt::Fatal(EmbedError::ProviderUnavailable(format!("{url}: HTTP {status}"))));
        }
        let body: Response = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(EmbedError::ProviderUnavailable(format!("{url}: bad response: {e}"))))?;
        if body.dim != self.dim {
            return Err(Attempt::Fatal(EmbedError::DimMismatch { expected: self.dim, got: body.dim }));
        }
        if body.tokens != body.states.len() {
            return Err(Attempt::Fatal(EmbedError::Shape(format!(
                "response declares {} tokens but carries {} rows",
                body.tokens,
                body.states.len()
            ))));
        }
        if let Some(row) = body.states.iter().find(|r| r.len() != self.dim) {
            return Err(Attempt::Fatal(EmbedError::DimMismatch { expected: self.dim, got: row.len() }));
        }
        TokenMatrix::from_rows(body.states).map_err(Attempt::Fatal)
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn id(&self) -> &str {
        &self.model
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn mode(&self) -> ProviderMode {
        ProviderMode::Remote
    }

    fn token_states(&self, prompt: &Prompt) -> Result<TokenMatrix, EmbedError> {
        let _serial = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut delay = self.backoff;
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.attempt(&prompt.text) {
                Ok(m) => return Ok(m),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(EmbedError::ProviderUnavailable(format!("{} attempts failed; last: {last}", self.retries + 1)))
    }
}
