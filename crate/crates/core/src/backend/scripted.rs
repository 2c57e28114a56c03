//! Deterministic backends for tests, fixtures and offline replay.
//!
//! Script files are JSON:
//!
//! ```json
//! {
//!   "script_version": 1,
//!   "responses": [{"agent": "ee", "round": 0, "text": "[...]"}],
//!   "rules": [{"agent": "ner", "input_contains": "Hangzhou", "text": "[(LOC, Hangzhou)]"}]
//! }
//! ```
//!
//! A `(agent, round)` response wins; otherwise the first rule whose
//! conditions all hold (`agent`, `round`, `input_equals`, `input_contains`,
//! `input_pattern` regex; absent conditions match anything) answers.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Attempt, BackendError, BackendFailure, Completion, CompletionBackend, CompletionRequest};
use crate::prompt::ChatMessage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedResponse {
    pub agent: String,
    pub round: u32,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_equals: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_pattern: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptFile {
    pub script_version: u32,
    #[serde(default)]
    pub responses: Vec<ScriptedResponse>,
    #[serde(default)]
    pub rules: Vec<ScriptRule>,
}

struct CompiledRule {
    rule: ScriptRule,
    pattern: Option<Regex>,
}

impl CompiledRule {
    fn matches(&self, req: &CompletionRequest<'_>) -> bool {
        let r = &self.rule;
        r.agent.as_deref().is_none_or(|a| a == req.agent_id)
            && r.round.is_none_or(|n| n == req.round)
            && r.input_equals.as_deref().is_none_or(|s| s == req.input_text)
            && r.input_contains.as_deref().is_none_or(|s| req.input_text.contains(s))
            && self.pattern.as_ref().is_none_or(|p| p.is_match(req.input_text))
    }
}

pub struct ScriptedBackend {
    responses: HashMap<(String, u32), String>,
    rules: Vec<CompiledRule>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self { responses: HashMap::new(), rules: Vec::new() }
    }

    pub fn with_response(mut self, agent: &str, round: u32, text: impl Into<String>) -> Self {
        self.responses.insert((agent.to_string(), round), text.into());
        self
    }

    pub fn with_rule(mut self, rule: ScriptRule) -> Result<Self, BackendError> {
        let pattern = rule
            .input_pattern
            .as_deref()
            .map(Regex::new)
            .transpose()
            .map_err(|e| BackendError::InvalidConfig(format!("bad input_pattern: {e}")))?;
        self.rules.push(CompiledRule { rule, pattern });
        Ok(self)
    }

    pub fn from_script(script: ScriptFile) -> Result<Self, BackendError> {
        if script.script_version != 1 {
            return Err(BackendError::InvalidConfig(format!(
                "unsupported script_version {}",
                script.script_version
            )));
        }
        let mut backend = Self::new();
        for r in script.responses {
            backend = backend.with_response(&r.agent, r.round, r.text);
        }
        for rule in script.rules {
            backend = backend.with_rule(rule)?;
        }
        Ok(backend)
    }

    pub fn from_json(source: &str) -> Result<Self, BackendError> {
        let script: ScriptFile =
            serde_json::from_str(source).map_err(|e| BackendError::InvalidConfig(format!("script: {e}")))?;
        Self::from_script(script)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::InvalidConfig(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Replays a capture file written by [`RecordingBackend`].
    pub fn from_capture(source: &str) -> Result<Self, BackendError> {
        let mut backend = Self::new();
        for (i, line) in source.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let entry: CaptureEntry = serde_json::from_str(line)
                .map_err(|e| BackendError::InvalidConfig(format!("capture line {}: {e}", i + 1)))?;
            backend = backend.with_rule(ScriptRule {
                agent: Some(entry.agent_id),
                round: Some(entry.round),
                input_equals: Some(entry.input_text),
                text: entry.response,
                ..Default::default()
            })?;
        }
        Ok(backend)
    }

    fn lookup(&self, req: &CompletionRequest<'_>) -> Option<&str> {
        self.responses
            .get(&(req.agent_id.to_string(), req.round))
            .map(String::as_str)
            .or_else(|| self.rules.iter().find(|r| r.matches(req)).map(|r| r.rule.text.as_str()))
    }
}

impl Default for ScriptedBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendFailure> {
        if request.messages.is_empty() {
            return Err(BackendFailure::single(BackendError::EmptyMessages));
        }
        match self.lookup(request) {
            Some(text) => Ok(Completion { text: text.to_string(), attempts: vec![Attempt { number: 1, error: None }] }),
            None => Err(BackendFailure::single(BackendError::MissingScript {
                agent_id: request.agent_id.to_string(),
                round: request.round,
            })),
        }
    }

    fn describe(&self) -> String {
        format!("scripted:{} responses, {} rules", self.responses.len(), self.rules.len())
    }
}

/// One request/response pair in a capture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureEntry {
    pub agent_id: String,
    pub round: u32,
    pub input_text: String,
    pub messages: Vec<ChatMessage>,
    pub response: String,
}

/// Mirrors successful completions of an inner backend to a JSON-lines
/// capture file.
pub struct RecordingBackend<B> {
    inner: B,
    sink: Mutex<File>,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B, capture_path: impl AsRef<Path>) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(capture_path)?;
        Ok(Self { inner, sink: Mutex::new(file) })
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendFailure> {
        let completion = self.inner.complete(request)?;
        let entry = CaptureEntry {
            agent_id: request.agent_id.to_string(),
            round: request.round,
            input_text: request.input_text.to_string(),
            messages: request.messages.to_vec(),
            response: completion.text.clone(),
        };
        let line = serde_json::to_string(&entry).expect("capture entry serializes");
        let mut sink = self.sink.lock().unwrap_or_else(|e| e.into_inner());
        if let Err(e) = writeln!(sink, "{line}") {
            tracing::warn!(error = %e, "failed to write capture entry");
        }
        Ok(completion)
    }

    fn describe(&self) -> String {
        self.inner.describe()
    }
}
