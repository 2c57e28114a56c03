//! Wires a one-way chain NER -> RE -> EE with strict relation typing and an
//! in-memory script, then shows who heard from whom.
//!
//! ```text
//! cargo run --example custom_topology
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use kgteam::backend::ScriptedBackend;
use kgteam::network::{AgentNode, CollaborationNetwork, CommunicationEdge};
use kgteam::schema::SchemaSpec;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let backend = Arc::new(
        ScriptedBackend::new()
            .with_response("ner", 0, "[(PER, Ann Meyer), (ORG, Acme), (LOC, Lisbon)]")
            .with_response("ner", 1, "[(PER, Ann Meyer), (ORG, Acme), (LOC, Lisbon)]")
            .with_response("re", 0, "[(Ann Meyer, person-place_lived, Lisbon), (Acme, person-place_lived, Lisbon)]")
            .with_response("re", 1, "The organisation cannot live anywhere. [(Ann Meyer, person-place_lived, Lisbon)]")
            .with_response("ee", 0, "[]")
            .with_response(
                "ee",
                1,
                "[{Trigger Type: Movement:Transport, Trigger Word: moved, Arguments: (Artifact, Ann Meyer), (Destination, Lisbon)}]",
            ),
    );
    let nodes = [("ner", "ner"), ("re", "re"), ("ee", "ee")]
        .into_iter()
        .map(|(id, s)| -> Result<AgentNode, Box<dyn std::error::Error>> {
            let schema = SchemaSpec::load(fixture(&format!("schemas/{s}.json")))?;
            Ok(AgentNode::new(id, Arc::new(schema), backend.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let edges = vec![CommunicationEdge::new("ner", "re"), CommunicationEdge::new("re", "ee")];
    let network = CollaborationNetwork::build(nodes, Some(edges), 4)?.with_strict_relation_types(true);

    let t = network.run_collaboration("Ann Meyer of Acme moved to Lisbon.", 1)?;
    for record in &t.rounds {
        for cell in &record.agents {
            let peers: Vec<&str> = cell.peer_replicas.iter().map(|p| p.agent_id.as_str()).collect();
            println!("round {} {:<3} hears {:?}: {}", record.round, cell.agent_id, peers, cell.replica.canonical_text);
            for r in &cell.rejected {
                println!("    dropped {} ({:?})", r.item, r.violation);
            }
        }
    }
    Ok(())
}
