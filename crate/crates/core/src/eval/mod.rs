//! Datasets, prediction/gold matching and micro-F1.
//!
//! Dataset files are JSON lines, one record each:
//!
//! ```text
//! {"id": "s1", "text": "Ann lives in Rome.",
//!  "gold": {"entities": [{"type": "PER", "span": "Ann"}],
//!           "relations": [{"head": "Ann", "relation": "person-place_lived", "tail": "Rome"}],
//!           "events": [{"trigger_type": "Movement:Transport", "trigger_word": "went",
//!                       "arguments": [{"role": "Destination", "span": "Rome"}]}]}}
//! ```
//!
//! A missing task key means the record is not annotated for that task and
//! is skipped when scoring it; an empty list means "nothing to find". An
//! optional `"dataset_version": 1` may appear on any line.
//!
//! Matching is exact on normalized strings. Entities count as
//! `(type, span)`, relations as `(head, relation, tail)`. An event counts
//! once for `(trigger_type, trigger_word)` and once per argument as
//! `(trigger_type, role, span)`.

mod bench;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::NetworkError;
use crate::records::{serialize, EntityMention, EventRecord, ExtractionItem, RelationTriple};
use crate::schema::TaskKind;
use crate::text::{collapse_whitespace, fold_width, normalize_label};

pub use bench::{
    echo_script, render_csv, render_table, run_benchmark, BenchOptions, ComponentScores, ConfigFingerprint,
    EvalReport, FingerprintAgent, RepetitionScore, ReportRow, REPORT_VERSION,
};

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{found} item in a {expected} item list")]
    MixedItems { expected: TaskKind, found: TaskKind },
    #[error("record `{record_id}`: {source}")]
    Record {
        record_id: String,
        #[source]
        source: NetworkError,
    },
    #[error("benchmark: {0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gold {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entities: Option<Vec<EntityMention>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations: Option<Vec<RelationTriple>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<Vec<EventRecord>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub text: String,
    pub gold: Gold,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetLine {
    #[serde(default)]
    dataset_version: Option<u32>,
    id: String,
    text: String,
    #[serde(default)]
    gold: Gold,
}

impl DatasetRecord {
    /// Gold items for `task`, or `None` when the record is not annotated for it.
    pub fn gold_items(&self, task: TaskKind) -> Option<Vec<ExtractionItem>> {
        match task {
            TaskKind::Ner => self.gold.entities.as_ref().map(|v| v.iter().cloned().map(ExtractionItem::Entity).collect()),
            TaskKind::Re => {
                self.gold.relations.as_ref().map(|v| v.iter().cloned().map(ExtractionItem::Relation).collect())
            }
            TaskKind::Ee => self.gold.events.as_ref().map(|v| v.iter().cloned().map(ExtractionItem::Event).collect()),
        }
    }

    /// Canonical answer text of the gold items; `"[]"` when unannotated.
    pub fn gold_canonical(&self, task: TaskKind) -> String {
        let items = self.gold_items(task).unwrap_or_default();
        serialize(&items, task).expect("gold lists are homogeneous")
    }

    fn check(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.text.trim().is_empty() {
            return Err("empty text".into());
        }
        let blank = |s: &str| s.trim().is_empty();
        for e in self.gold.entities.iter().flatten() {
            if blank(&e.entity_type) || blank(&e.span) {
                return Err(format!("blank field in entity {e:?}"));
            }
        }
        for r in self.gold.relations.iter().flatten() {
            if blank(&r.head) || blank(&r.relation) || blank(&r.tail) {
                return Err(format!("blank field in relation {r:?}"));
            }
        }
        for ev in self.gold.events.iter().flatten() {
            if blank(&ev.trigger_type) || blank(&ev.trigger_word) {
                return Err(format!("blank trigger in event {ev:?}"));
            }
            if ev.arguments.iter().any(|a| blank(&a.role) || blank(&a.span)) {
                return Err(format!("blank argument in event {ev:?}"));
            }
        }
        Ok(())
    }
}

pub fn parse_dataset(source: &str) -> Result<Vec<DatasetRecord>, EvalError> {
    let mut records = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| EvalError::Parse { line: line_no, message };
        let parsed: DatasetLine = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if let Some(v) = parsed.dataset_version.filter(|&v| v != DATASET_VERSION) {
            return Err(err(format!("unsupported dataset_version {v}")));
        }
        let record = DatasetRecord { id: parsed.id, text: parsed.text, gold: parsed.gold };
        record.check().map_err(err)?;
        if !ids.insert(record.id.clone()) {
            return Err(err(format!("duplicate id `{}`", record.id)));
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    Ok(records)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>, EvalError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| EvalError::Io { path: path.display().to_string(), source })?;
    parse_dataset(&text)
}

/// Looser matching variants. The default is exact after NFC, trim and
/// whitespace collapsing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchOptions {
    /// Fold full-width ASCII forms to half-width before comparing.
    #[serde(default)]
    pub fold_width: bool,
    #[serde(default)]
    pub case_insensitive: bool,
}

impl MatchOptions {
    pub fn normalize(&self, s: &str) -> String {
        let mut out = collapse_whitespace(&normalize_label(s));
        if self.fold_width {
            out = collapse_whitespace(&fold_width(&out));
        }
        if self.case_insensitive {
            out = out.to_lowercase();
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl MatchCounts {
    pub fn new(true_positives: u64, false_positives: u64, false_negatives: u64) -> Self {
        Self { true_positives, false_positives, false_negatives }
    }
}

impl std::ops::Add for MatchCounts {
    type Output = MatchCounts;
    fn add(self, o: MatchCounts) -> MatchCounts {
        MatchCounts::new(
            self.true_positives + o.true_positives,
            self.false_positives + o.false_positives,
            self.false_negatives + o.false_negatives,
        )
    }
}

impl std::ops::AddAssign for MatchCounts {
    fn add_assign(&mut self, o: MatchCounts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for MatchCounts {
    fn sum<I: Iterator<Item = MatchCounts>>(iter: I) -> Self {
        iter.fold(MatchCounts::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 from pooled counts; every zero denominator
/// yields 0.
pub fn micro_f1(counts: MatchCounts) -> Prf {
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(counts.true_positives, counts.true_positives + counts.false_positives);
    let recall = ratio(counts.true_positives, counts.true_positives + counts.false_negatives);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Prf { precision, recall, f1 }
}

/// Which part of an item a countable element came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Entity,
    Relation,
    Trigger,
    Argument,
}

/// Normalized countable elements of an item list.
pub fn elements(
    items: &[ExtractionItem],
    task: TaskKind,
    opts: MatchOptions,
) -> Result<Vec<(Component, Vec<String>)>, EvalError> {
    let n = |s: &str| opts.normalize(s);
    let mut out = Vec::new();
    for item in items {
        if item.task() != task {
            return Err(EvalError::MixedItems { expected: task, found: item.task() });
        }
        match item {
            ExtractionItem::Entity(e) => out.push((Component::Entity, vec![n(&e.entity_type), n(&e.span)])),
            ExtractionItem::Relation(r) => {
                out.push((Component::Relation, vec![n(&r.head), n(&r.relation), n(&r.tail)]))
            }
            ExtractionItem::Event(ev) => {
                let ty = n(&ev.trigger_type);
                out.push((Component::Trigger, vec![ty.clone(), n(&ev.trigger_word)]));
                for a in &ev.arguments {
                    out.push((Component::Argument, vec![ty.clone(), n(&a.role), n(&a.span)]));
                }
            }
        }
    }
    Ok(out)
}

/// Counts per element component. Matching is multiset intersection, so a
/// duplicated prediction can match at most as many gold copies as exist.
pub fn match_components(
    pred: &[ExtractionItem],
    gold: &[ExtractionItem],
    task: TaskKind,
    opts: MatchOptions,
) -> Result<HashMap<Component, MatchCounts>, EvalError> {
    let mut bag: HashMap<(Component, Vec<String>), (u64, u64)> = HashMap::new();
    for e in elements(pred, task, opts)? {
        bag.entry(e).or_default().0 += 1;
    }
    for e in elements(gold, task, opts)? {
        bag.entry(e).or_default().1 += 1;
    }
    let mut out: HashMap<Component, MatchCounts> = HashMap::new();
    for ((component, _), (p, g)) in bag {
        let tp = p.min(g);
        *out.entry(component).or_default() += MatchCounts::new(tp, p - tp, g - tp);
    }
    Ok(out)
}

pub fn match_items_with(
    pred: &[ExtractionItem],
    gold: &[ExtractionItem],
    task: TaskKind,
    opts: MatchOptions,
) -> Result<MatchCounts, EvalError> {
    Ok(match_components(pred, gold, task, opts)?.into_values().sum())
}

pub fn match_items(pred: &[ExtractionItem], gold: &[ExtractionItem], task: TaskKind) -> Result<MatchCounts, EvalError> {
    match_items_with(pred, gold, task, MatchOptions::default())
}
