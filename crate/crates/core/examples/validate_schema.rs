//! Loads schema files, reports their shape and checks items against them.
//!
//! ```text
//! cargo run --example validate_schema [schema.json ...]
//! ```

use std::path::PathBuf;

use kgteam::records::{EntityMention, EventArgument, EventRecord, ExtractionItem, RelationTriple};
use kgteam::schema::{SchemaSpec, TaskKind};

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn probe(task: TaskKind) -> Vec<ExtractionItem> {
    match task {
        TaskKind::Ner => vec![
            ExtractionItem::Entity(EntityMention::new("PER", "Ann Meyer")),
            ExtractionItem::Entity(EntityMention::new("DATE", "Monday")),
        ],
        TaskKind::Re => vec![
            ExtractionItem::Relation(RelationTriple::new("Ann Meyer", "person-nationality", "Portugal")),
            ExtractionItem::Relation(RelationTriple::new("Ann Meyer", "employer", "Acme")),
        ],
        TaskKind::Ee => vec![
            ExtractionItem::Event(EventRecord {
                trigger_type: "Conflict-Attack".into(),
                trigger_word: "attacked".into(),
                arguments: vec![EventArgument::new("Attacker", "Gunmen")],
            }),
            ExtractionItem::Event(EventRecord {
                trigger_type: "Conflict-Attack".into(),
                trigger_word: "attacked".into(),
                arguments: vec![EventArgument::new("Vehicle", "truck")],
            }),
        ],
    }
}

fn main() {
    let mut paths: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if paths.is_empty() {
        paths = ["ner", "re", "ee"].iter().map(|t| fixture(&format!("schemas/{t}.json"))).collect();
    }
    for path in paths {
        let schema = match SchemaSpec::load(&path) {
            Ok(s) => s,
            Err(e) => {
                println!("INVALID {}: {e}", path.display());
                continue;
            }
        };
        println!("{}: {} schema `{}` with {} types", path.display(), schema.task.code(), schema.id, schema.type_count());
        println!("{}", schema.render_constraint_list());
        for item in probe(schema.task) {
            match schema.is_compliant(&item) {
                Ok(c) => println!("  {item} -> {c:?}"),
                Err(e) => println!("  {item} -> error: {e}"),
            }
        }
        println!();
    }

    let bad = r#"{"schema_version": 1, "id": "dup", "task": "NER", "entity_types": ["PER", "PER"]}"#;
    println!("duplicate labels: {}", SchemaSpec::from_json(bad).unwrap_err());
}
