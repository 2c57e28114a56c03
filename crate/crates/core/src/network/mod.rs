//! The collaboration graph and the synchronous round engine.
//!
//! Round 0 runs every agent independently on the input. Each later round
//! delivers the previous round's replicas along the directed edges, asks every
//! agent to revise its answer, and simplifies the responses into new
//! replicas. Rounds are barriers: no round-t prompt is assembled before every
//! round-(t-1) replica exists. Within a round, completions run concurrently.

mod config;
mod engine;
mod transcript;

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, CompletionBackend};
use crate::prompt::{DemoStore, Embedder, HashingEmbedder, PromptError};
use crate::records::RecordsError;
use crate::schema::{SchemaError, SchemaSpec, TaskKind};

pub use config::{AgentConfig, NetworkConfig, NETWORK_CONFIG_VERSION};
pub use engine::filter_ans;
pub use transcript::{AgentInfo, AgentRound, FinalAnswer, PeerReplica, RoundRecord, Timing, Transcript};

pub const DEFAULT_MAX_ROUNDS: u32 = 4;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("a network needs at least one agent")]
    NoAgents,
    #[error("duplicate agent id `{0}`")]
    DuplicateAgentId(String),
    #[error("edge from `{0}` to itself")]
    SelfLoop(String),
    #[error("edge endpoint `{0}` is not an agent")]
    UnknownEndpoint(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("agent `{agent}` is a {agent_task} agent but schema `{schema}` is for {schema_task}")]
    TaskMismatch { agent: String, agent_task: TaskKind, schema: String, schema_task: TaskKind },
    #[error("input text is empty")]
    EmptyInput,
    #[error("{requested} rounds requested but the network allows at most {max}")]
    RoundsExceeded { requested: u32, max: u32 },
    #[error("no round replica from `{sender}` for receiver `{receiver}`")]
    IncompleteRound { receiver: String, sender: String },
    #[error("network config: {0}")]
    Config(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Records(#[from] RecordsError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// One expert agent.
#[derive(Clone)]
pub struct AgentNode {
    pub agent_id: String,
    pub task: TaskKind,
    pub schema: Arc<SchemaSpec>,
    pub demos: Option<Arc<DemoStore>>,
    pub n_way: usize,
    pub k_shot: usize,
    pub opening_override: Option<String>,
    pub backend: Arc<dyn CompletionBackend>,
}

impl AgentNode {
    pub fn new(agent_id: impl Into<String>, schema: Arc<SchemaSpec>, backend: Arc<dyn CompletionBackend>) -> Self {
        Self {
            agent_id: agent_id.into(),
            task: schema.task,
            schema,
            demos: None,
            n_way: 1,
            k_shot: 0,
            opening_override: None,
            backend,
        }
    }

    pub fn with_demos(mut self, demos: Arc<DemoStore>, n_way: usize, k_shot: usize) -> Self {
        self.demos = Some(demos);
        self.n_way = n_way;
        self.k_shot = k_shot;
        self
    }
}

impl std::fmt::Debug for AgentNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AgentNode")
            .field("agent_id", &self.agent_id)
            .field("task", &self.task)
            .field("schema", &self.schema.id)
            .field("k_shot", &self.k_shot)
            .finish_non_exhaustive()
    }
}

/// Directed edge: `to` receives `from`'s previous-round replica.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CommunicationEdge {
    pub from: String,
    pub to: String,
}

impl CommunicationEdge {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Self { from: from.into(), to: to.into() }
    }
}

/// The communication unit: agents, directed edges and the round limit.
pub struct CollaborationNetwork {
    nodes: Vec<AgentNode>,
    edges: BTreeSet<CommunicationEdge>,
    max_rounds: u32,
    strict_relation_types: bool,
    embedder: Arc<dyn Embedder>,
}

impl CollaborationNetwork {
    /// Validates the graph. Without explicit edges every ordered pair of
    /// distinct agents is connected.
    pub fn build(
        nodes: Vec<AgentNode>,
        edges: Option<Vec<CommunicationEdge>>,
        max_rounds: u32,
    ) -> Result<Self, NetworkError> {
        if nodes.is_empty() {
            return Err(NetworkError::NoAgents);
        }
        let mut ids = HashSet::new();
        for node in &nodes {
            if !ids.insert(node.agent_id.as_str()) {
                return Err(NetworkError::DuplicateAgentId(node.agent_id.clone()));
            }
            if node.schema.task != node.task {
                return Err(NetworkError::TaskMismatch {
                    agent: node.agent_id.clone(),
                    agent_task: node.task,
                    schema: node.schema.id.clone(),
                    schema_task: node.schema.task,
                });
            }
        }
        let edges = match edges {
            None => nodes
                .iter()
                .flat_map(|a| {
                    nodes
                        .iter()
                        .filter(move |b| b.agent_id != a.agent_id)
                        .map(move |b| CommunicationEdge::new(&a.agent_id, &b.agent_id))
                })
                .collect(),
            Some(list) => {
                let mut set = BTreeSet::new();
                for e in list {
                    for end in [&e.from, &e.to] {
                        if !ids.contains(end.as_str()) {
                            return Err(NetworkError::UnknownEndpoint(end.clone()));
                        }
                    }
                    if e.from == e.to {
                        return Err(NetworkError::SelfLoop(e.from));
                    }
                    if set.contains(&e) {
                        return Err(NetworkError::DuplicateEdge(e.from, e.to));
                    }
                    set.insert(e);
                }
                set
            }
        };
        Ok(Self {
            nodes,
            edges,
            max_rounds,
            strict_relation_types: false,
            embedder: Arc::new(HashingEmbedder::default()),
        })
    }

    /// Checks relation head/tail types against the NER agents' replicas.
    pub fn with_strict_relation_types(mut self, strict: bool) -> Self {
        self.strict_relation_types = strict;
        self
    }

    pub fn with_embedder(mut self, embedder: Arc<dyn Embedder>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn nodes(&self) -> &[AgentNode] {
        &self.nodes
    }

    pub fn node(&self, agent_id: &str) -> Option<&AgentNode> {
        self.nodes.iter().find(|n| n.agent_id == agent_id)
    }

    pub fn edges(&self) -> &BTreeSet<CommunicationEdge> {
        &self.edges
    }

    pub fn max_rounds(&self) -> u32 {
        self.max_rounds
    }

    pub fn strict_relation_types(&self) -> bool {
        self.strict_relation_types
    }

    /// Senders with an edge into `receiver`, ascending by agent id.
    pub fn in_neighbours<'a>(&'a self, receiver: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges.iter().filter(move |e| e.to == receiver).map(|e| e.from.as_str())
    }
}
