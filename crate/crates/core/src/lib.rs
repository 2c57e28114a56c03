//! A team of extraction agents (entities, relations, events) that build a
//! knowledge graph by repeatedly reading each other's answers.
//!
//! An agent answers once on its own, then for each collaboration round
//! receives its in-neighbours' replicas, answers again, and has the answer
//! distilled against its schema. The last round's replica is the output.
//!
//! - [`schema`]: type inventories and compliance checks.
//! - [`records`]: items, the tolerant parser and canonical replica text.
//! - [`prompt`]: prompt assembly and nearest-neighbour demonstrations.
//! - [`backend`]: completion backends, remote and scripted.
//! - [`network`]: the communication graph and round loop.
//! - [`eval`]: datasets, matching and the round-sweep benchmark.
//! - [`cli`]: the `kgteam` command line.

pub mod backend;
pub mod cli;
pub mod eval;
pub mod network;
pub mod prompt;
pub mod records;
pub mod schema;
pub mod text;
