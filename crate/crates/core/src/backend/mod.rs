//! Completion backends: an OpenAI-compatible chat-completions client with
//! retry/backoff, and a deterministic scripted backend for tests and replay.

mod remote;
mod scripted;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::ChatMessage;

pub use remote::{HttpResponse, HttpTransport, RemoteBackend, Transport};
pub use scripted::{CaptureEntry, RecordingBackend, ScriptFile, ScriptRule, ScriptedBackend, ScriptedResponse};

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum BackendError {
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("rate limited")]
    RateLimited,
    #[error("request timed out")]
    Timeout,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("HTTP status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("no scripted response for agent `{agent_id}` round {round}")]
    MissingScript { agent_id: String, round: u32 },
    #[error("environment variable `{0}` holding the API key is not set")]
    MissingApiKey(String),
    #[error("empty message sequence")]
    EmptyMessages,
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
}

impl BackendError {
    /// Transport, rate-limit, server-side and decoding failures are retried;
    /// authentication and configuration failures never are.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::RateLimited
            | BackendError::Timeout
            | BackendError::Transport(_)
            | BackendError::MalformedResponse(_) => true,
            BackendError::Http { status, .. } => *status == 408 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_retries: u32,
    #[serde(with = "secs")]
    pub timeout: Duration,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    /// Delay before the first retry; doubles on each further retry.
    #[serde(with = "millis")]
    pub backoff_base: Duration,
    pub seed: Option<u64>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            max_retries: 2,
            timeout: Duration::from_secs(60),
            api_key_env: "OPENAI_API_KEY".into(),
            backoff_base: Duration::from_millis(500),
            seed: None,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(BackendError::InvalidConfig(format!("temperature {} < 0", self.temperature)));
        }
        if self.timeout.is_zero() {
            return Err(BackendError::InvalidConfig("timeout must be positive".into()));
        }
        Ok(())
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// Everything a backend may key on. Remote backends only send `messages`.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub agent_id: &'a str,
    pub round: u32,
    pub input_text: &'a str,
    pub messages: &'a [ChatMessage],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub number: u32,
    /// `None` on success.
    pub error: Option<BackendError>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub attempts: Vec<Attempt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{error} (after {} attempt(s))", attempts.len())]
pub struct BackendFailure {
    pub error: BackendError,
    pub attempts: Vec<Attempt>,
}

impl BackendFailure {
    pub fn single(error: BackendError) -> Self {
        Self { attempts: vec![Attempt { number: 1, error: Some(error.clone()) }], error }
    }
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendFailure>;

    /// Stable description used in configuration fingerprints.
    fn describe(&self) -> String;
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for Box<T> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendFailure> {
        (**self).complete(request)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = BackendConfig::default();
        assert_eq!(c.temperature, 0.0);
        assert_eq!(c.max_retries, 2);
        assert_eq!(c.timeout, Duration::from_secs(60));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn invalid_configs() {
        let c = BackendConfig { temperature: -0.5, ..Default::default() };
        assert!(matches!(c.validate(), Err(BackendError::InvalidConfig(_))));
        let c = BackendConfig { timeout: Duration::ZERO, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_from_partial_json() {
        let c: BackendConfig = serde_json::from_str(r#"{"model_name": "local", "timeout": 5}"#).unwrap();
        assert_eq!(c.model_name, "local");
        assert_eq!(c.timeout, Duration::from_secs(5));
        assert_eq!(c.api_key_env, "OPENAI_API_KEY");
    }

    #[test]
    fn retry_classes() {
        assert!(BackendError::RateLimited.is_retryable());
        assert!(BackendError::Http { status: 503, body: String::new() }.is_retryable());
        assert!(!BackendError::Http { status: 400, body: String::new() }.is_retryable());
        assert!(!BackendError::Auth("bad key".into()).is_retryable());
    }
}
