//! Prompt assembly: opening statement, task definition, in-context
//! demonstrations and the collaboration prompt.
//!
//! Message layouts are fixed so transcripts are reproducible:
//!
//! * initial round: `system` opening statement, `system` task definition,
//!   one `user`/`assistant` pair per demonstration, `user` input text;
//! * refinement rounds: `user` input text, `user` collaboration prompt
//!   (which carries the peer replicas), `system` opening statement,
//!   `system` task definition, and when shots are configured one `system`
//!   message listing the demonstrations.

mod demos;
mod embed;

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::records::Replica;
use crate::schema::{SchemaSpec, TaskKind};

pub use demos::{select_demonstrations, DemoExample, DemoSelection, DemoStore};
pub use embed::{euclidean_distance, Embedder, HashingEmbedder, RemoteEmbedder, DEFAULT_DIMENSION, DEFAULT_HASH_SEED};

pub const DEFAULT_OPENING: &str = "You are a knowledge graph constructor, need to synthesise relation \
extraction agent, named entity recognition agent, and event extraction agent to constitute an \
extraction collaborative team, which guides the agents to refine their results by referring to the \
extraction answers of others.";

pub const LAST_ROUND_PLACEHOLDER: &str = "LAST_ROUND_RESULT";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("demonstration store is empty")]
    EmptyStore,
    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("requested {requested} demonstrations from a store of {available}")]
    TooFewExamples { requested: usize, available: usize },
    #[error("template placeholder ##{0}## has no value")]
    Template(String),
    #[error("invalid collaboration context: {0}")]
    InvalidContext(String),
    #[error("demo store line {line}: {message}")]
    DemoParse { line: usize, message: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Embed(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// The round-invariant part of an agent's prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub opening: String,
    pub task_definition: String,
    pub demonstrations: Vec<DemoExample>,
}

impl PromptBundle {
    pub fn new(schema: &SchemaSpec, opening_override: Option<&str>, demonstrations: Vec<DemoExample>) -> Self {
        Self {
            opening: opening_statement(opening_override).to_string(),
            task_definition: task_definition(schema),
            demonstrations,
        }
    }
}

/// What an agent sees from round t-1: its own replica and the replica queue
/// delivered along its in-edges.
#[derive(Debug, Clone)]
pub struct CollabContext {
    pub own_last_replica: Replica,
    pub peer_replicas: Vec<Replica>,
}

pub fn opening_statement(override_text: Option<&str>) -> &str {
    override_text.unwrap_or(DEFAULT_OPENING)
}

fn output_format_sentence(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Ner => "Each result is returned as a tuple, e.g. [(entity type 1, entity 1), ...]",
        TaskKind::Re => {
            "Each result is returned as a tuple, e.g. [(head entity 1, relation type 1, tail entity 1), ...]"
        }
        TaskKind::Ee => {
            "Each result is returned as a record, e.g. [{Trigger Type: event type 1, Trigger Word: trigger 1, \
             Arguments: (role 1, argument 1), ...}, ...]"
        }
    }
}

/// Three sentences: expert identity, output format, constraint list.
pub fn task_definition(schema: &SchemaSpec) -> String {
    format!(
        "You are an excellent expert in {}.\n{}\n{}",
        schema.task.display_name(),
        output_format_sentence(schema.task),
        schema.render_constraint_list()
    )
}

pub fn assemble_initial(input: &str, bundle: &PromptBundle) -> Vec<ChatMessage> {
    let mut messages = vec![
        ChatMessage::system(bundle.opening.clone()),
        ChatMessage::system(bundle.task_definition.clone()),
    ];
    for demo in &bundle.demonstrations {
        messages.push(ChatMessage::user(demo.text.clone()));
        messages.push(ChatMessage::assistant(demo.gold_answer_canonical.clone()));
    }
    messages.push(ChatMessage::user(input));
    messages
}

pub fn assemble_round(
    input: &str,
    ctx: &CollabContext,
    bundle: &PromptBundle,
) -> Result<Vec<ChatMessage>, PromptError> {
    let collaboration = collaboration_prompt(ctx)?;
    let mut messages = vec![
        ChatMessage::user(input),
        ChatMessage::user(collaboration),
        ChatMessage::system(bundle.opening.clone()),
        ChatMessage::system(bundle.task_definition.clone()),
    ];
    if !bundle.demonstrations.is_empty() {
        let blocks: Vec<String> = bundle
            .demonstrations
            .iter()
            .map(|d| format!("Input: {}\nAnswer: {}", d.text, d.gold_answer_canonical))
            .collect();
        messages.push(ChatMessage::system(format!("Examples:\n{}", blocks.join("\n\n"))));
    }
    Ok(messages)
}

fn placeholder_suffix(agent_id: &str) -> String {
    agent_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
        .collect()
}

/// Template of the collaboration prompt with one placeholder per peer, plus
/// the values to substitute.
pub fn collaboration_template(ctx: &CollabContext) -> Result<(String, HashMap<String, String>), PromptError> {
    let own = &ctx.own_last_replica;
    for peer in &ctx.peer_replicas {
        if peer.agent_id == own.agent_id {
            return Err(PromptError::InvalidContext(format!(
                "agent `{}` appears in its own replica queue",
                own.agent_id
            )));
        }
        if peer.round != own.round {
            return Err(PromptError::InvalidContext(format!(
                "replica of `{}` is from round {}, expected {}",
                peer.agent_id, peer.round, own.round
            )));
        }
    }

    let mut values = HashMap::new();
    values.insert(LAST_ROUND_PLACEHOLDER.to_string(), own.canonical_text.clone());
    let mut template = format!(
        "The {} answer you gave in the last round of collaboration was \"##{LAST_ROUND_PLACEHOLDER}##\".",
        own.task.display_name()
    );

    let mut per_task: HashMap<TaskKind, usize> = HashMap::new();
    for peer in &ctx.peer_replicas {
        *per_task.entry(peer.task).or_default() += 1;
    }
    for (i, peer) in ctx.peer_replicas.iter().enumerate() {
        let shared = per_task[&peer.task] > 1;
        let (name, label) = if shared {
            (
                format!("{}_RESULT_{}", peer.task.code(), placeholder_suffix(&peer.agent_id)),
                format!("{} expert agent {}", peer.task.code(), peer.agent_id),
            )
        } else {
            (format!("{}_RESULT", peer.task.code()), format!("{} expert agent", peer.task.code()))
        };
        if i == 0 {
            template.push_str(&format!(" The answer given by the {label} was \"##{name}##\""));
        } else {
            template.push_str(&format!(", The {label} was \"##{name}##\""));
        }
        if values.insert(name.clone(), peer.canonical_text.clone()).is_some() {
            return Err(PromptError::InvalidContext(format!("placeholder ##{name}## assigned twice")));
        }
    }
    if !ctx.peer_replicas.is_empty() {
        template.push('.');
    }
    template.push_str(" You should refer to other members to revise your answer.");
    Ok((template, values))
}

/// The instantiated collaboration prompt.
pub fn collaboration_prompt(ctx: &CollabContext) -> Result<String, PromptError> {
    let (template, values) = collaboration_template(ctx)?;
    fill_template(&template, &values)
}

fn placeholder_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"##([A-Za-z0-9_]+)##").expect("valid placeholder pattern"))
}

/// Substitutes every `##NAME##` in `template`. Substituted values are not
/// rescanned.
pub fn fill_template(template: &str, values: &HashMap<String, String>) -> Result<String, PromptError> {
    let mut missing = None;
    let filled = placeholder_pattern().replace_all(template, |caps: &regex::Captures<'_>| {
        match values.get(&caps[1]) {
            Some(v) => v.clone(),
            None => {
                missing.get_or_insert_with(|| caps[1].to_string());
                String::new()
            }
        }
    });
    match missing {
        Some(name) => Err(PromptError::Template(name)),
        None => Ok(filled.into_owned()),
    }
}
