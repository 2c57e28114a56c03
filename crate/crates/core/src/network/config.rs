//! Network configuration files.
//!
//! ```json
//! {
//!   "network_version": 1,
//!   "max_rounds": 4,
//!   "strict_relation_types": false,
//!   "opening_statement": null,
//!   "agents": [
//!     {"id": "ner", "task": "NER", "schema": "schemas/ner.json",
//!      "demos": "demos/ner.jsonl", "demo_vectors": null, "n_way": 1, "shots": 0}
//!   ],
//!   "edges": [["ner", "re"]],
//!   "backend": {"model_name": "gpt-3.5-turbo", "temperature": 0.0}
//! }
//! ```
//!
//! Relative paths resolve against the config file's directory. Without
//! `edges` the graph is complete.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AgentNode, CollaborationNetwork, CommunicationEdge, NetworkError, DEFAULT_MAX_ROUNDS};
use crate::backend::{BackendConfig, CompletionBackend};
use crate::prompt::{DemoStore, Embedder};
use crate::schema::{SchemaSpec, TaskKind};

pub const NETWORK_CONFIG_VERSION: u32 = 1;

fn default_rounds() -> u32 {
    DEFAULT_MAX_ROUNDS
}

fn default_n_way() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub id: String,
    pub task: TaskKind,
    pub schema: PathBuf,
    #[serde(default)]
    pub demos: Option<PathBuf>,
    #[serde(default)]
    pub demo_vectors: Option<PathBuf>,
    #[serde(default = "default_n_way")]
    pub n_way: usize,
    #[serde(default)]
    pub shots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub network_version: u32,
    #[serde(default = "default_rounds")]
    pub max_rounds: u32,
    #[serde(default)]
    pub strict_relation_types: bool,
    #[serde(default)]
    pub opening_statement: Option<String>,
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub edges: Option<Vec<(String, String)>>,
    #[serde(default)]
    pub backend: BackendConfig,
    /// Directory relative paths resolve against; set by [`NetworkConfig::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl NetworkConfig {
    pub fn from_json(source: &str, base_dir: impl Into<PathBuf>) -> Result<Self, NetworkError> {
        let mut config: NetworkConfig = serde_json::from_str(source).map_err(|e| NetworkError::Config(e.to_string()))?;
        if config.network_version != NETWORK_CONFIG_VERSION {
            return Err(NetworkError::Config(format!("unsupported network_version {}", config.network_version)));
        }
        config.base_dir = base_dir.into();
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| NetworkError::Io { path: path.display().to_string(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base).map_err(|e| match e {
            NetworkError::Config(msg) => NetworkError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Loads schemas and demonstration stores and wires every agent to
    /// `backend`. `shots_override` replaces each agent's `shots`.
    pub fn build(
        &self,
        backend: Arc<dyn CompletionBackend>,
        embedder: Arc<dyn Embedder>,
        shots_override: Option<usize>,
    ) -> Result<CollaborationNetwork, NetworkError> {
        let mut nodes = Vec::with_capacity(self.agents.len());
        for agent in &self.agents {
            let schema = Arc::new(SchemaSpec::load(self.resolve(&agent.schema))?);
            if schema.task != agent.task {
                return Err(NetworkError::TaskMismatch {
                    agent: agent.id.clone(),
                    agent_task: agent.task,
                    schema: schema.id.clone(),
                    schema_task: schema.task,
                });
            }
            let shots = shots_override.unwrap_or(agent.shots);
            let mut node = AgentNode::new(agent.id.clone(), schema, backend.clone());
            node.opening_override = self.opening_statement.clone();
            node.n_way = agent.n_way;
            node.k_shot = shots;
            if shots > 0 {
                let demos = agent.demos.as_ref().ok_or_else(|| {
                    NetworkError::Config(format!("agent `{}` requests {shots} shots but has no demos", agent.id))
                })?;
                let sidecar = agent.demo_vectors.as_ref().map(|p| self.resolve(p));
                let store = DemoStore::load(self.resolve(demos), agent.task, embedder.as_ref(), sidecar.as_deref())?;
                node.demos = Some(Arc::new(store));
            }
            nodes.push(node);
        }
        let edges = self
            .edges
            .as_ref()
            .map(|list| list.iter().map(|(a, b)| CommunicationEdge::new(a, b)).collect());
        Ok(CollaborationNetwork::build(nodes, edges, self.max_rounds)?
            .with_strict_relation_types(self.strict_relation_types)
            .with_embedder(embedder))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use crate::prompt::HashingEmbedder;

    fn write(dir: &Path, name: &str, body: &str) {
        std::fs::write(dir.join(name), body).unwrap();
    }

    #[test]
    fn loads_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "ner.json", r#"{"schema_version":1,"id":"n","task":"NER","entity_types":["PER"]}"#);
        write(dir.path(), "re.json", r#"{"schema_version":1,"id":"r","task":"RE","relation_constraints":[{"relation":"r","head":"PER","tail":"PER"}]}"#);
        write(dir.path(), "ner.jsonl", "{\"text\": \"Ann ran.\", \"answer\": \"[(PER, Ann)]\"}\n");
        write(
            dir.path(),
            "net.json",
            r#"{"network_version": 1, "max_rounds": 2, "agents": [
                {"id": "ner", "task": "NER", "schema": "ner.json", "demos": "ner.jsonl", "shots": 1},
                {"id": "re", "task": "RE", "schema": "re.json"}],
               "edges": [["ner", "re"]]}"#,
        );
        let cfg = NetworkConfig::load(dir.path().join("net.json")).unwrap();
        let net = cfg.build(Arc::new(ScriptedBackend::new()), Arc::new(HashingEmbedder::default()), None).unwrap();
        assert_eq!(net.max_rounds(), 2);
        assert_eq!(net.edges().len(), 1);
        assert_eq!(net.node("ner").unwrap().demos.as_ref().unwrap().examples.len(), 1);
        let zero = cfg.build(Arc::new(ScriptedBackend::new()), Arc::new(HashingEmbedder::default()), Some(0)).unwrap();
        assert!(zero.node("ner").unwrap().demos.is_none());
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            NetworkConfig::load("/nonexistent/net.json"),
            Err(NetworkError::Io { path, .. }) if path.contains("nonexistent")
        ));
        assert!(NetworkConfig::from_json(r#"{"network_version": 2, "agents": []}"#, ".").is_err());
        assert!(NetworkConfig::from_json(r#"{"network_version": 1, "agents": [], "bogus": 1}"#, ".").is_err());

        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "ner.json", r#"{"schema_version":1,"id":"n","task":"NER","entity_types":["PER"]}"#);
        let cfg = NetworkConfig::from_json(
            r#"{"network_version": 1, "agents": [{"id": "x", "task": "RE", "schema": "ner.json"}]}"#,
            dir.path(),
        )
        .unwrap();
        let err = cfg.build(Arc::new(ScriptedBackend::new()), Arc::new(HashingEmbedder::default()), None);
        assert!(matches!(err, Err(NetworkError::TaskMismatch { .. })));
        let cfg = NetworkConfig::from_json(
            r#"{"network_version": 1, "agents": [{"id": "x", "task": "NER", "schema": "ner.json", "shots": 2}]}"#,
            dir.path(),
        )
        .unwrap();
        let err = cfg.build(Arc::new(ScriptedBackend::new()), Arc::new(HashingEmbedder::default()), None);
        assert!(matches!(err, Err(NetworkError::Config(_))));
    }
}
