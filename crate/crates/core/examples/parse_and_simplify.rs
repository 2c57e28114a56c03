//! Parses a chatty model response into typed items, then distils it into a
//! replica that keeps only what the schema allows.
//!
//! ```text
//! cargo run --example parse_and_simplify
//! ```

use kgteam::records::{parse_result, simplify_with};
use kgteam::schema::{ComplianceContext, SchemaSpec, SpanTypes};

const RE_SCHEMA: &str = r#"{
  "schema_version": 1, "id": "demo-re", "task": "RE",
  "relation_constraints": [
    {"relation": "person-nationality", "head": "PER", "tail": "LOC"},
    {"relation": "person-place_lived", "head": "PER", "tail": "LOC"}
  ]
}"#;

const RESPONSE: &str = "Comparing with the entity agent, Acme is an organisation, \
so I revise my list to [(Ann Meyer, person-nationality, Portugal), \
(Acme, person-place_lived, Lisbon), (Ann Meyer, employer, Acme), (broken, tuple)]";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = SchemaSpec::from_json(RE_SCHEMA)?;
    let result = parse_result(schema.task, RESPONSE);
    println!("parsed {} items", result.items.len());
    for w in &result.parse_warnings {
        println!("  warning: {w}");
    }

    let (lenient, rejected) = simplify_with(&result, &schema, ComplianceContext::default(), "re", 1)?;
    println!("\nlenient replica: {}", lenient.canonical_text);
    for r in &rejected {
        println!("  dropped {} ({:?})", r.item, r.violation);
    }

    // Span types as an NER agent would report them in the same round.
    let types: SpanTypes = [("Ann Meyer", "PER"), ("Acme", "ORG"), ("Portugal", "LOC"), ("Lisbon", "LOC")]
        .into_iter()
        .map(|(s, t)| (s.to_string(), t.to_string()))
        .collect();
    let ctx = ComplianceContext { strict_relation_types: true, span_types: Some(&types) };
    let (strict, rejected) = simplify_with(&result, &schema, ctx, "re", 1)?;
    println!("\nstrict replica:  {}", strict.canonical_text);
    for r in &rejected {
        println!("  dropped {} ({:?})", r.item, r.violation);
    }

    // Canonical text is self-describing: parsing it gives the same items back.
    assert_eq!(strict.reconstruct().items, strict.items);
    Ok(())
}
