//! OpenAI-compatible chat completions over HTTP.
//!
//! Request body: `{"model", "messages": [{"role", "content"}], "temperature"}`
//! plus `"seed"` when configured. The reply text is
//! `choices[0].message.content`.

use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};
use tracing::warn;

use super::{
    Attempt, BackendConfig, BackendError, BackendFailure, Completion, CompletionBackend, CompletionRequest,
};
use crate::prompt::ChatMessage;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    /// Maps non-success statuses onto backend errors.
    pub fn check_status(&self) -> Result<(), BackendError> {
        match self.status {
            200..=299 => Ok(()),
            401 | 403 => Err(BackendError::Auth(truncate(&self.body))),
            429 => Err(BackendError::RateLimited),
            status => Err(BackendError::Http { status, body: truncate(&self.body) }),
        }
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(300).collect()
}

/// The HTTP seam; swapped out in tests to inject faults.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpResponse, BackendError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Self {
        Self { client: reqwest::blocking::Client::new() }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for HttpTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> Result<HttpResponse, BackendError> {
        let mut request = self.client.post(url).timeout(timeout).json(body);
        if let Some(key) = bearer {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        Ok(HttpResponse { status, body })
    }
}

pub struct RemoteBackend {
    config: BackendConfig,
    api_key: String,
    transport: Arc<dyn Transport>,
}

impl RemoteBackend {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(config: BackendConfig) -> Result<Self, BackendError> {
        let key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| BackendError::MissingApiKey(config.api_key_env.clone()))?;
        Self::with_transport(config, key, Arc::new(HttpTransport::new()))
    }

    pub fn with_transport(
        config: BackendConfig,
        api_key: impl Into<String>,
        transport: Arc<dyn Transport>,
    ) -> Result<Self, BackendError> {
        config.validate()?;
        Ok(Self { config, api_key: api_key.into(), transport })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn request_body(&self, messages: &[ChatMessage]) -> Value {
        let mut body = json!({
            "model": self.config.model_name,
            "messages": messages,
            "temperature": self.config.temperature,
        });
        if let Some(seed) = self.config.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn attempt(&self, body: &Value) -> Result<String, BackendError> {
        let response =
            self.transport
                .post_json(&self.config.endpoint_url, Some(&self.api_key), body, self.config.timeout)?;
        response.check_status()?;
        let value: Value =
            serde_json::from_str(&response.body).map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::MalformedResponse("missing choices[0].message.content".into()))
    }
}

impl CompletionBackend for RemoteBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendFailure> {
        if request.messages.is_empty() {
            return Err(BackendFailure::single(BackendError::EmptyMessages));
        }
        let body = self.request_body(request.messages);
        let mut attempts = Vec::new();
        for number in 1..=self.config.max_retries + 1 {
            if number > 1 {
                let delay = self.config.backoff_base.saturating_mul(1 << (number - 2).min(16));
                std::thread::sleep(delay);
            }
            match self.attempt(&body) {
                Ok(text) => {
                    attempts.push(Attempt { number, error: None });
                    return Ok(Completion { text, attempts });
                }
                Err(error) => {
                    attempts.push(Attempt { number, error: Some(error.clone()) });
                    let exhausted = number > self.config.max_retries;
                    if !error.is_retryable() || exhausted {
                        return Err(BackendFailure { error, attempts });
                    }
                    warn!(agent = request.agent_id, round = request.round, attempt = number, %error, "retrying completion");
                }
            }
        }
        unreachable!("loop returns on the final attempt")
    }

    fn describe(&self) -> String {
        format!(
            "remote:{}@{} temperature={} seed={:?}",
            self.config.model_name, self.config.endpoint_url, self.config.temperature, self.config.seed
        )
    }
}
