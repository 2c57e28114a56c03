//! Picks N-way K-shot demonstrations nearest to an input and shows the
//! round-0 prompt they produce.
//!
//! ```text
//! cargo run --example demo_selection -- 1 2
//! ```

use std::path::PathBuf;

use kgteam::prompt::{assemble_initial, select_demonstrations, DemoStore, Embedder, HashingEmbedder, PromptBundle};
use kgteam::schema::SchemaSpec;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>());
    let n_way = args.next().transpose()?.unwrap_or(1);
    let k_shot = args.next().transpose()?.unwrap_or(2);

    let schema = SchemaSpec::load(fixture("schemas/ee.json"))?;
    let embedder = HashingEmbedder::default();
    let store = DemoStore::load(fixture("demos/ee.jsonl"), schema.task, &embedder, None)?;
    let input = "Police shipped the seized weapons to Kampala by truck.";

    let selection = select_demonstrations(&store.examples, &embedder.embed(input)?, n_way, k_shot)?;
    println!("{n_way}-way {k_shot}-shot from {} demonstrations", store.examples.len());
    for &(i, d) in &selection.picks {
        println!("  #{i} [{}] d={d:.3} {}", store.examples[i].label, store.examples[i].text);
    }
    if selection.fallback {
        println!("  (a label ran short; filled with nearest remaining)");
    }

    let bundle = PromptBundle::new(&schema, None, selection.examples(&store.examples));
    println!();
    for m in assemble_initial(input, &bundle) {
        println!("[{:?}]\n{}\n", m.role, m.content);
    }
    Ok(())
}
