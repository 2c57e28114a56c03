//! Extraction items, the tolerant response parser, the canonical replica text
//! and the simplification step that turns a raw response into a replica.
//!
//! Canonical replica text is a single line:
//!
//! ```text
//! ner     := "[" ( "(" TYPE ", " SPAN ")" ) % ", " "]"
//! re      := "[" ( "(" HEAD ", " RELATION ", " TAIL ")" ) % ", " "]"
//! ee      := "[" event % ", " "]"
//! event   := "{Trigger Type: " TYPE ", Trigger Word: " WORD [ ", Arguments: " arg % ", " ] "}"
//! arg     := "(" ROLE ", " SPAN ")"
//! ```
//!
//! `x % sep` is zero or more `x` separated by `sep`; an event without
//! arguments omits the `Arguments:` key.

mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{Compliance, ComplianceContext, SchemaError, SchemaSpec, TaskKind, Violation};

pub use parse::parse_result;

#[derive(Debug, Error)]
pub enum RecordsError {
    #[error("{found} item in a {expected} item list")]
    MixedItems { expected: TaskKind, found: TaskKind },
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityMention {
    #[serde(rename = "type")]
    pub entity_type: String,
    pub span: String,
}

impl EntityMention {
    pub fn new(entity_type: impl Into<String>, span: impl Into<String>) -> Self {
        Self { entity_type: entity_type.into(), span: span.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl RelationTriple {
    pub fn new(head: impl Into<String>, relation: impl Into<String>, tail: impl Into<String>) -> Self {
        Self { head: head.into(), relation: relation.into(), tail: tail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventArgument {
    pub role: String,
    pub span: String,
}

impl EventArgument {
    pub fn new(role: impl Into<String>, span: impl Into<String>) -> Self {
        Self { role: role.into(), span: span.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventRecord {
    pub trigger_type: String,
    pub trigger_word: String,
    #[serde(default)]
    pub arguments: Vec<EventArgument>,
}

/// One extracted element. A list of items is homogeneous with its task.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExtractionItem {
    Event(EventRecord),
    Relation(RelationTriple),
    Entity(EntityMention),
}

impl ExtractionItem {
    pub fn task(&self) -> TaskKind {
        match self {
            ExtractionItem::Entity(_) => TaskKind::Ner,
            ExtractionItem::Relation(_) => TaskKind::Re,
            ExtractionItem::Event(_) => TaskKind::Ee,
        }
    }
}

impl fmt::Display for ExtractionItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtractionItem::Entity(e) => write!(f, "({}, {})", e.entity_type, e.span),
            ExtractionItem::Relation(r) => write!(f, "({}, {}, {})", r.head, r.relation, r.tail),
            ExtractionItem::Event(ev) => {
                write!(f, "{{Trigger Type: {}, Trigger Word: {}", ev.trigger_type, ev.trigger_word)?;
                for (i, a) in ev.arguments.iter().enumerate() {
                    let lead = if i == 0 { ", Arguments: " } else { ", " };
                    write!(f, "{lead}({}, {})", a.role, a.span)?;
                }
                f.write_str("}")
            }
        }
    }
}

/// Parsed answer of one agent for one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub task: TaskKind,
    pub items: Vec<ExtractionItem>,
    /// The full response, chain-of-thought prose included.
    pub raw_text: String,
    pub parse_warnings: Vec<String>,
}

/// The schema-distilled answer an agent delivers to its peers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replica {
    pub agent_id: String,
    pub round: u32,
    pub task: TaskKind,
    pub items: Vec<ExtractionItem>,
    pub canonical_text: String,
}

impl Replica {
    /// Empty replica, used when an agent failed its round.
    pub fn empty(agent_id: impl Into<String>, round: u32, task: TaskKind) -> Self {
        Self {
            agent_id: agent_id.into(),
            round,
            task,
            items: Vec::new(),
            canonical_text: "[]".to_string(),
        }
    }

    /// Rebuilds an extraction result from the canonical text alone.
    pub fn reconstruct(&self) -> ExtractionResult {
        parse_result(self.task, &self.canonical_text)
    }
}

/// An item dropped by simplification, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub item: String,
    pub violation: Violation,
}

/// Writes items as canonical single-line replica text.
pub fn serialize(items: &[ExtractionItem], task: TaskKind) -> Result<String, RecordsError> {
    if let Some(bad) = items.iter().find(|i| i.task() != task) {
        return Err(RecordsError::MixedItems { expected: task, found: bad.task() });
    }
    let body: Vec<String> = items.iter().map(ToString::to_string).collect();
    Ok(format!("[{}]", body.join(", ")))
}

/// Simplification: keeps the schema-compliant items, drops all prose.
pub fn simplify(
    result: &ExtractionResult,
    schema: &SchemaSpec,
    agent_id: &str,
    round: u32,
) -> Result<Replica, RecordsError> {
    simplify_with(result, schema, ComplianceContext::default(), agent_id, round).map(|(r, _)| r)
}

/// [`simplify`] with an explicit compliance context; also returns the
/// rejected items.
pub fn simplify_with(
    result: &ExtractionResult,
    schema: &SchemaSpec,
    ctx: ComplianceContext<'_>,
    agent_id: &str,
    round: u32,
) -> Result<(Replica, Vec<Rejection>), RecordsError> {
    if result.task != schema.task {
        return Err(SchemaError::TaskMismatch { schema: schema.task, item: result.task }.into());
    }
    let mut kept = Vec::with_capacity(result.items.len());
    let mut rejected = Vec::new();
    for item in &result.items {
        match schema.is_compliant_with(item, ctx)? {
            Compliance::Compliant => kept.push(item.clone()),
            Compliance::NonCompliant(violation) => {
                rejected.push(Rejection { item: item.to_string(), violation })
            }
        }
    }
    let canonical_text = serialize(&kept, schema.task)?;
    let replica = Replica {
        agent_id: agent_id.to_string(),
        round,
        task: schema.task,
        items: kept,
        canonical_text,
    };
    Ok((replica, rejected))
}
