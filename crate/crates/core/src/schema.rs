//! Task schemas: the type inventories that constrain agent output and drive
//! replica filtering.
//!
//! Schema files are JSON documents carrying `"schema_version": 1`:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "id": "nyt11-hrl",
//!   "task": "RE",
//!   "relation_constraints": [
//!     {"relation": "person-nationality", "head": "PER", "tail": "LOC"}
//!   ]
//! }
//! ```
//!
//! `entity_types` (NER), `relation_constraints` (RE) and `event_types` (EE,
//! each `{"event_type": ..., "roles": [...]}`) are the three lists; only the
//! one matching `task` may be present and it must be non-empty.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::records::ExtractionItem;
use crate::text::normalize_label;

pub const SCHEMA_VERSION: u32 = 1;

/// One of the three extraction sub-tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "NER")]
    Ner,
    #[serde(rename = "RE")]
    Re,
    #[serde(rename = "EE")]
    Ee,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Ner, TaskKind::Re, TaskKind::Ee];

    /// Short label used in placeholders and report columns ("NER", "RE", "EE").
    pub fn code(self) -> &'static str {
        match self {
            TaskKind::Ner => "NER",
            TaskKind::Re => "RE",
            TaskKind::Ee => "EE",
        }
    }

    /// Name used in prompt prose.
    pub fn display_name(self) -> &'static str {
        match self {
            TaskKind::Ner => "named entity recognition",
            TaskKind::Re => "relation extraction",
            TaskKind::Ee => "event extraction",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for TaskKind {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NER" => Ok(TaskKind::Ner),
            "RE" => Ok(TaskKind::Re),
            "EE" => Ok(TaskKind::Ee),
            _ => Err(SchemaError::UnknownTask(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationConstraint {
    pub relation: String,
    pub head: String,
    pub tail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTypeSpec {
    pub event_type: String,
    #[serde(default)]
    pub roles: Vec<String>,
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("duplicate type name `{0}`")]
    DuplicateType(String),
    #[error("schema `{id}` has an empty {list} list for task {task}")]
    EmptySchema { id: String, task: TaskKind, list: &'static str },
    #[error("schema `{id}` for task {task} must not define {list}")]
    IrrelevantList { id: String, task: TaskKind, list: &'static str },
    #[error("unknown task `{0}` (expected NER, RE or EE)")]
    UnknownTask(String),
    #[error("empty type name in {0}")]
    EmptyName(&'static str),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    UnsupportedVersion(u32),
    #[error("item of task {item} checked against {schema} schema")]
    TaskMismatch { schema: TaskKind, item: TaskKind },
    #[error("malformed schema document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("reading schema {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Validated task schema. Immutable once loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaSpec {
    pub id: String,
    pub task: TaskKind,
    pub entity_types: Vec<String>,
    pub relation_constraints: Vec<RelationConstraint>,
    pub event_types: Vec<EventTypeSpec>,
}

#[derive(Serialize, Deserialize)]
struct SchemaDocument {
    schema_version: u32,
    id: String,
    task: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    entity_types: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    relation_constraints: Vec<RelationConstraint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    event_types: Vec<EventTypeSpec>,
}

/// Why an item failed the schema check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Violation {
    UnknownEntityType { entity_type: String },
    UnknownRelation { relation: String },
    UnknownEventType { event_type: String },
    UnknownRole { event_type: String, role: String },
    HeadTypeMismatch { relation: String, expected: String, found: String },
    TailTypeMismatch { relation: String, expected: String, found: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownEntityType { entity_type } => {
                write!(f, "entity type `{entity_type}` is not in the schema")
            }
            Violation::UnknownRelation { relation } => {
                write!(f, "relation `{relation}` is not in the schema")
            }
            Violation::UnknownEventType { event_type } => {
                write!(f, "event type `{event_type}` is not in the schema")
            }
            Violation::UnknownRole { event_type, role } => {
                write!(f, "role `{role}` is not defined for event type `{event_type}`")
            }
            Violation::HeadTypeMismatch { relation, expected, found } => {
                write!(f, "head of `{relation}` typed {found}, expected {expected}")
            }
            Violation::TailTypeMismatch { relation, expected, found } => {
                write!(f, "tail of `{relation}` typed {found}, expected {expected}")
            }
        }
    }
}

/// Outcome of a compliance check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Compliance {
    Compliant,
    NonCompliant(Violation),
}

impl Compliance {
    pub fn is_compliant(&self) -> bool {
        matches!(self, Compliance::Compliant)
    }
}

/// Entity types known for surface spans, taken from an NER agent's replica.
pub type SpanTypes = HashMap<String, String>;

/// Extra context for compliance checks. The default checks labels only.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplianceContext<'a> {
    /// Check relation head/tail entity types where both spans are typed.
    pub strict_relation_types: bool,
    pub span_types: Option<&'a SpanTypes>,
}

impl SchemaSpec {
    pub fn from_json(source: &str) -> Result<Self, SchemaError> {
        let doc: SchemaDocument = serde_json::from_str(source)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(SchemaError::UnsupportedVersion(doc.schema_version));
        }
        let task: TaskKind = doc.task.parse()?;
        let schema = SchemaSpec {
            id: doc.id.trim().to_string(),
            task,
            entity_types: doc.entity_types.iter().map(|s| normalize_label(s)).collect(),
            relation_constraints: doc
                .relation_constraints
                .iter()
                .map(|c| RelationConstraint {
                    relation: normalize_label(&c.relation),
                    head: normalize_label(&c.head),
                    tail: normalize_label(&c.tail),
                })
                .collect(),
            event_types: doc
                .event_types
                .iter()
                .map(|e| EventTypeSpec {
                    event_type: normalize_label(&e.event_type),
                    roles: e.roles.iter().map(|r| normalize_label(r)).collect(),
                })
                .collect(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SchemaError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let doc = SchemaDocument {
            schema_version: SCHEMA_VERSION,
            id: self.id.clone(),
            task: self.task.code().to_string(),
            entity_types: self.entity_types.clone(),
            relation_constraints: self.relation_constraints.clone(),
            event_types: self.event_types.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("schema document serializes")
    }

    /// Checks every invariant: the relevant list is non-empty, the others are
    /// empty, and names are non-empty and unique.
    pub fn validate(&self) -> Result<(), SchemaError> {
        let lists = [
            (TaskKind::Ner, "entity_types", self.entity_types.is_empty()),
            (TaskKind::Re, "relation_constraints", self.relation_constraints.is_empty()),
            (TaskKind::Ee, "event_types", self.event_types.is_empty()),
        ];
        for (task, list, empty) in lists {
            if task == self.task && empty {
                return Err(SchemaError::EmptySchema { id: self.id.clone(), task, list });
            }
            if task != self.task && !empty {
                return Err(SchemaError::IrrelevantList { id: self.id.clone(), task: self.task, list });
            }
        }
        unique(self.entity_types.iter(), "entity_types")?;
        unique(self.relation_constraints.iter().map(|c| &c.relation), "relation_constraints")?;
        for c in &self.relation_constraints {
            if c.head.is_empty() || c.tail.is_empty() {
                return Err(SchemaError::EmptyName("relation_constraints"));
            }
        }
        unique(self.event_types.iter().map(|e| &e.event_type), "event_types")?;
        for e in &self.event_types {
            unique(e.roles.iter(), "event roles")?;
        }
        Ok(())
    }

    /// Number of entries in the task's list.
    pub fn type_count(&self) -> usize {
        match self.task {
            TaskKind::Ner => self.entity_types.len(),
            TaskKind::Re => self.relation_constraints.len(),
            TaskKind::Ee => self.event_types.len(),
        }
    }

    pub fn relation(&self, name: &str) -> Option<&RelationConstraint> {
        let name = normalize_label(name);
        self.relation_constraints.iter().find(|c| c.relation == name)
    }

    pub fn event_type(&self, name: &str) -> Option<&EventTypeSpec> {
        let name = normalize_label(name);
        self.event_types.iter().find(|e| e.event_type == name)
    }

    /// Renders the constraint-list sentence of the task definition.
    pub fn render_constraint_list(&self) -> String {
        match self.task {
            TaskKind::Ner => format!(
                "The list of constrained entity types is: [{}]",
                self.entity_types.join(", ")
            ),
            TaskKind::Re => {
                let body: Vec<String> = self
                    .relation_constraints
                    .iter()
                    .map(|c| format!("{}: [{}, {}]", c.relation, c.head, c.tail))
                    .collect();
                format!("The list of constrained relations is: [{}]", body.join(", "))
            }
            TaskKind::Ee => {
                let body: Vec<String> = self
                    .event_types
                    .iter()
                    .map(|e| format!("{}: [{}]", e.event_type, e.roles.join(", ")))
                    .collect();
                format!("The list of constrained event types is: [{}]", body.join(", "))
            }
        }
    }

    /// Label-only compliance check.
    pub fn is_compliant(&self, item: &ExtractionItem) -> Result<Compliance, SchemaError> {
        self.is_compliant_with(item, ComplianceContext::default())
    }

    pub fn is_compliant_with(
        &self,
        item: &ExtractionItem,
        ctx: ComplianceContext<'_>,
    ) -> Result<Compliance, SchemaError> {
        if item.task() != self.task {
            return Err(SchemaError::TaskMismatch { schema: self.task, item: item.task() });
        }
        let verdict = match item {
            ExtractionItem::Entity(e) => {
                let label = normalize_label(&e.entity_type);
                if self.entity_types.contains(&label) {
                    Compliance::Compliant
                } else {
                    Compliance::NonCompliant(Violation::UnknownEntityType { entity_type: label })
                }
            }
            ExtractionItem::Relation(r) => match self.relation(&r.relation) {
                None => Compliance::NonCompliant(Violation::UnknownRelation {
                    relation: normalize_label(&r.relation),
                }),
                Some(c) => match (ctx.strict_relation_types, ctx.span_types) {
                    (true, Some(types)) => check_argument_types(c, &r.head, &r.tail, types),
                    _ => Compliance::Compliant,
                },
            },
            ExtractionItem::Event(ev) => match self.event_type(&ev.trigger_type) {
                None => Compliance::NonCompliant(Violation::UnknownEventType {
                    event_type: normalize_label(&ev.trigger_type),
                }),
                Some(spec) => ev
                    .arguments
                    .iter()
                    .map(|a| normalize_label(&a.role))
                    .find(|role| !spec.roles.contains(role))
                    .map_or(Compliance::Compliant, |role| {
                        Compliance::NonCompliant(Violation::UnknownRole {
                            event_type: spec.event_type.clone(),
                            role,
                        })
                    }),
            },
        };
        Ok(verdict)
    }
}

// Only spans typed on both ends are checked; untyped spans pass.
fn check_argument_types(
    c: &RelationConstraint,
    head: &str,
    tail: &str,
    types: &SpanTypes,
) -> Compliance {
    if let (Some(h), Some(t)) = (types.get(head), types.get(tail)) {
        if *h != c.head {
            return Compliance::NonCompliant(Violation::HeadTypeMismatch {
                relation: c.relation.clone(),
                expected: c.head.clone(),
                found: h.clone(),
            });
        }
        if *t != c.tail {
            return Compliance::NonCompliant(Violation::TailTypeMismatch {
                relation: c.relation.clone(),
                expected: c.tail.clone(),
                found: t.clone(),
            });
        }
    }
    Compliance::Compliant
}

fn unique<'a>(names: impl Iterator<Item = &'a String>, list: &'static str) -> Result<(), SchemaError> {
    let mut seen = HashSet::new();
    for name in names {
        if name.is_empty() {
            return Err(SchemaError::EmptyName(list));
        }
        if !seen.insert(name.as_str()) {
            return Err(SchemaError::DuplicateType(name.clone()));
        }
    }
    Ok(())
}
