//! Runs the team against a live chat-completions endpoint. The key is read
//! from the variable named by the config's `api_key_env`; without it the
//! example says so and exits.
//!
//! ```text
//! OPENAI_API_KEY=... cargo run --example live_remote -- "Some sentence."
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use kgteam::backend::RemoteBackend;
use kgteam::network::NetworkConfig;
use kgteam::prompt::HashingEmbedder;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = NetworkConfig::load(fixture("network.json"))?;
    if std::env::var_os(&config.backend.api_key_env).is_none() {
        println!("{} is not set; nothing to do", config.backend.api_key_env);
        return Ok(());
    }
    let input = std::env::args().nth(1).unwrap_or_else(|| {
        "Israeli troops shot dead two Palestinian police officers at the Gaza border crossing.".into()
    });
    let backend = Arc::new(RemoteBackend::from_env(config.backend.clone())?);
    let network = config.build(backend, Arc::new(HashingEmbedder::default()), Some(2))?;
    let t = network.run_collaboration(&input, 2)?;
    for record in &t.rounds {
        for cell in &record.agents {
            let status = match &cell.failure {
                Some(e) => format!("failed: {e}"),
                None => cell.replica.canonical_text.clone(),
            };
            println!("round {} {:<3} {status}", record.round, cell.agent_id);
        }
    }
    Ok(())
}
