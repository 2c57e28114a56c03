//! Seeded generators and fixture helpers shared by the integration targets.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use kgteam::records::{EntityMention, EventArgument, EventRecord, ExtractionItem, RelationTriple};
use kgteam::schema::{SchemaSpec, TaskKind};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn schema(task: TaskKind) -> Arc<SchemaSpec> {
    let name = match task {
        TaskKind::Ner => "schemas/ner.json",
        TaskKind::Re => "schemas/re.json",
        TaskKind::Ee => "schemas/ee.json",
    };
    Arc::new(SchemaSpec::load(fixture(name)).expect("fixture schema"))
}

pub fn case_study_input() -> String {
    std::fs::read_to_string(fixture("case_study_input.txt")).unwrap().trim().to_string()
}

const WORD_CHARS: &[char] = &[
    'a', 'b', 'c', 'd', 'e', 'i', 'k', 'n', 'o', 'r', 's', 't', 'u', 'A', 'B', 'I', 'P', 'T', '0', '7', '.', '-',
    '\u{e9}', '\u{fc}', '\u{df}', '\u{676d}', '\u{5dde}',
];

const LABEL_CHARS: &[char] = &['a', 'e', 'l', 'o', 'r', 't', 'A', 'L', 'P', 'R', '-', '_', '0'];

pub fn word(rng: &mut TestRng) -> String {
    let n = rng.gen_range(1..=7);
    (0..n).map(|_| *WORD_CHARS.choose(rng).unwrap()).collect()
}

/// 1-4 words joined by single spaces, optionally with `, ` separators.
pub fn span(rng: &mut TestRng, commas: bool) -> String {
    let n = rng.gen_range(1..=4);
    let mut out = word(rng);
    for _ in 1..n {
        out.push_str(if commas && rng.gen_bool(0.25) { ", " } else { " " });
        out.push_str(&word(rng));
    }
    out
}

/// Whitespace- and comma-free label; `colon` allows `A:B` forms.
pub fn label(rng: &mut TestRng, colon: bool) -> String {
    let make = |rng: &mut TestRng| -> String {
        let n = rng.gen_range(1..=9);
        (0..n).map(|_| *LABEL_CHARS.choose(rng).unwrap()).collect()
    };
    let first = make(rng);
    if colon && rng.gen_bool(0.3) {
        format!("{first}:{}", make(rng))
    } else {
        first
    }
}

pub fn item(rng: &mut TestRng, task: TaskKind) -> ExtractionItem {
    match task {
        TaskKind::Ner => ExtractionItem::Entity(EntityMention::new(label(rng, true), span(rng, true))),
        TaskKind::Re => ExtractionItem::Relation(RelationTriple::new(span(rng, false), label(rng, true), span(rng, false))),
        TaskKind::Ee => {
            let mut arguments: Vec<EventArgument> = Vec::new();
            for _ in 0..rng.gen_range(0..=4) {
                let a = EventArgument::new(label(rng, false), span(rng, false));
                if !arguments.contains(&a) {
                    arguments.push(a);
                }
            }
            ExtractionItem::Event(EventRecord { trigger_type: label(rng, true), trigger_word: span(rng, false), arguments })
        }
    }
}

/// 0-6 distinct items of one task.
pub fn items(rng: &mut TestRng, task: TaskKind) -> Vec<ExtractionItem> {
    let mut out: Vec<ExtractionItem> = Vec::new();
    for _ in 0..rng.gen_range(0..=6) {
        let it = item(rng, task);
        if !out.contains(&it) {
            out.push(it);
        }
    }
    out
}

/// Item drawn mostly from the schema's own vocabulary, sometimes not.
pub fn schema_item(rng: &mut TestRng, schema: &SchemaSpec) -> ExtractionItem {
    let off = rng.gen_bool(0.3);
    match schema.task {
        TaskKind::Ner => {
            let ty = if off { label(rng, false) } else { schema.entity_types.choose(rng).unwrap().clone() };
            ExtractionItem::Entity(EntityMention::new(ty, span(rng, false)))
        }
        TaskKind::Re => {
            let rel = if off { label(rng, false) } else { schema.relation_constraints.choose(rng).unwrap().relation.clone() };
            ExtractionItem::Relation(RelationTriple::new(span(rng, false), rel, span(rng, false)))
        }
        TaskKind::Ee => {
            let ev = schema.event_types.choose(rng).unwrap();
            let trigger_type = if off && rng.gen_bool(0.5) { label(rng, true) } else { ev.event_type.clone() };
            let mut arguments: Vec<EventArgument> = Vec::new();
            for _ in 0..rng.gen_range(0..=3) {
                let role = if off && rng.gen_bool(0.5) { label(rng, false) } else { ev.roles.choose(rng).unwrap().clone() };
                let a = EventArgument::new(role, span(rng, false));
                if !arguments.contains(&a) {
                    arguments.push(a);
                }
            }
            ExtractionItem::Event(EventRecord { trigger_type, trigger_word: span(rng, false), arguments })
        }
    }
}

/// A raw model response: chain-of-thought prose around a list of items, with
/// optional malformed fragments.
pub fn raw_response(rng: &mut TestRng, schema: &SchemaSpec) -> String {
    let n = rng.gen_range(0..=6);
    let body: Vec<String> = (0..n).map(|_| schema_item(rng, schema).to_string()).collect();
    let mut raw = String::new();
    if rng.gen_bool(0.5) {
        raw.push_str("Having looked at the other answers, my revised list is ");
    }
    raw.push('[');
    raw.push_str(&body.join(if rng.gen_bool(0.5) { ", " } else { "\n" }));
    raw.push(']');
    if rng.gen_bool(0.2) {
        raw.push_str(match schema.task {
            TaskKind::Ner => " (PER)",
            TaskKind::Re => " (a, b)",
            TaskKind::Ee => " {Trigger Type: X}",
        });
    }
    raw
}
