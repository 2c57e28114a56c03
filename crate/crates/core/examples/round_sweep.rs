//! Benchmarks a team whose answers improve after the first exchange, sweeping
//! the number of collaboration rounds and printing the F1 curve.
//!
//! ```text
//! cargo run --example round_sweep
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use kgteam::backend::{ScriptRule, ScriptedBackend};
use kgteam::eval::{echo_script, load_dataset, render_table, run_benchmark, BenchOptions};
use kgteam::network::NetworkConfig;
use kgteam::prompt::HashingEmbedder;
use kgteam::records::serialize;
use kgteam::schema::TaskKind;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dataset = load_dataset(fixture("synthetic.jsonl"))?;
    let team = [("ner", TaskKind::Ner), ("re", TaskKind::Re), ("ee", TaskKind::Ee)];

    // Round 0 answers hold only the first gold item; later rounds echo gold.
    let mut script = echo_script(&dataset, &team);
    let mut first_round = Vec::new();
    for rec in &dataset {
        for (agent, task) in team {
            let gold = rec.gold_items(task).unwrap_or_default();
            first_round.push(ScriptRule {
                agent: Some(agent.into()),
                round: Some(0),
                input_equals: Some(rec.text.clone()),
                text: serialize(&gold[..gold.len().min(1)], task)?,
                ..Default::default()
            });
        }
    }
    first_round.append(&mut script.rules);
    script.rules = first_round;

    let config = NetworkConfig::load(fixture("network.json"))?;
    let backend = Arc::new(ScriptedBackend::from_script(script)?);
    let network = config.build(backend, Arc::new(HashingEmbedder::default()), None)?;
    let opts = BenchOptions { rounds_list: vec![0, 1, 2], repetitions: 2, jobs: 4, ..Default::default() };
    let report = run_benchmark(&network, &dataset, &opts)?;
    print!("{}", render_table(&report));
    Ok(())
}
