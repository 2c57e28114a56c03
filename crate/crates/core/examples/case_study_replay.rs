//! Replays the three-agent case study from a recorded script and prints how
//! each agent's replica evolves round by round.
//!
//! ```text
//! cargo run --example case_study_replay
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use kgteam::backend::ScriptedBackend;
use kgteam::network::NetworkConfig;
use kgteam::prompt::HashingEmbedder;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = NetworkConfig::load(fixture("network.json"))?;
    let backend = Arc::new(ScriptedBackend::load(fixture("scripts/case_study.json"))?);
    let network = config.build(backend, Arc::new(HashingEmbedder::default()), None)?;

    let input = std::fs::read_to_string(fixture("case_study_input.txt"))?;
    let transcript = network.run_collaboration(input.trim(), 4)?;

    println!("input: {}\n", transcript.input_text);
    for record in &transcript.rounds {
        println!("round {}", record.round);
        for cell in &record.agents {
            println!("  {:<3} {}", cell.agent_id, cell.replica.canonical_text);
            for r in &cell.rejected {
                println!("      dropped {} ({:?})", r.item, r.violation);
            }
        }
    }
    println!("\nfinal answers");
    for answer in &transcript.final_outputs {
        println!("  {} ({}): {}", answer.agent_id, answer.task.code(), answer.canonical_text);
    }
    transcript.check_invariants()?;
    Ok(())
}
