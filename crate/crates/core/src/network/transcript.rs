//! Full record of one collaboration run, persisted as JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NetworkError;
use crate::backend::{Attempt, BackendError};
use crate::prompt::ChatMessage;
use crate::records::{ExtractionItem, Rejection, Replica};
use crate::schema::TaskKind;

pub const TRANSCRIPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentInfo {
    pub agent_id: String,
    pub task: TaskKind,
    pub schema_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerReplica {
    pub agent_id: String,
    pub canonical_text: String,
}

/// One agent's work in one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRound {
    pub agent_id: String,
    pub task: TaskKind,
    /// The replica queue this agent received (empty in round 0).
    pub peer_replicas: Vec<PeerReplica>,
    pub messages: Vec<ChatMessage>,
    pub raw_response: String,
    pub parse_warnings: Vec<String>,
    pub rejected: Vec<Rejection>,
    pub replica: Replica,
    pub attempts: Vec<Attempt>,
    pub failure: Option<BackendError>,
    /// Logical clock value when the prompt was assembled.
    pub assembled_seq: u64,
    /// Logical clock value when the replica was produced.
    pub replica_seq: u64,
    /// Wall-clock completion latency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub agents: Vec<AgentRound>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalAnswer {
    pub agent_id: String,
    pub task: TaskKind,
    pub items: Vec<ExtractionItem>,
    pub canonical_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub started_at: String,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub transcript_version: u32,
    pub input_text: String,
    pub agents: Vec<AgentInfo>,
    pub edges: Vec<(String, String)>,
    pub rounds: Vec<RoundRecord>,
    pub final_outputs: Vec<FinalAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl Transcript {
    pub fn cell(&self, round: u32, agent_id: &str) -> Option<&AgentRound> {
        self.rounds
            .get(round as usize)
            .and_then(|r| r.agents.iter().find(|a| a.agent_id == agent_id))
    }

    pub fn final_answer(&self, agent_id: &str) -> Option<&FinalAnswer> {
        self.final_outputs.iter().find(|f| f.agent_id == agent_id)
    }

    pub fn last_round(&self) -> u32 {
        self.rounds.len().saturating_sub(1) as u32
    }

    /// Copy with every wall-clock field cleared.
    pub fn without_timing(&self) -> Transcript {
        let mut t = self.clone();
        t.timing = None;
        for cell in t.rounds.iter_mut().flat_map(|r| r.agents.iter_mut()) {
            cell.elapsed_ms = None;
        }
        t
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }

    pub fn from_json(source: &str) -> Result<Self, NetworkError> {
        let t: Transcript = serde_json::from_str(source).map_err(|e| NetworkError::Config(format!("transcript: {e}")))?;
        if t.transcript_version != TRANSCRIPT_VERSION {
            return Err(NetworkError::Config(format!("unsupported transcript_version {}", t.transcript_version)));
        }
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NetworkError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json())
            .map_err(|source| NetworkError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| NetworkError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// Structural invariants: contiguous rounds, every agent in every round,
    /// replicas stamped with their round, the round barrier respected, and
    /// nobody receiving its own replica.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut barrier = 0u64;
        for (i, round) in self.rounds.iter().enumerate() {
            if round.round as usize != i {
                return Err(format!("round {} stored at position {i}", round.round));
            }
            if round.agents.len() != self.agents.len() {
                return Err(format!("round {i} has {} agents of {}", round.agents.len(), self.agents.len()));
            }
            for (cell, info) in round.agents.iter().zip(&self.agents) {
                if cell.agent_id != info.agent_id {
                    return Err(format!("round {i}: expected agent {}, found {}", info.agent_id, cell.agent_id));
                }
                if cell.replica.round as usize != i || cell.replica.agent_id != cell.agent_id {
                    return Err(format!("round {i}: replica of {} mislabelled", cell.agent_id));
                }
                if i > 0 && cell.assembled_seq <= barrier {
                    return Err(format!("round {i}: {} assembled before the round barrier", cell.agent_id));
                }
                if cell.peer_replicas.iter().any(|p| p.agent_id == cell.agent_id) {
                    return Err(format!("round {i}: {} received its own replica", cell.agent_id));
                }
            }
            barrier = round.agents.iter().map(|c| c.replica_seq).max().unwrap_or(barrier);
        }
        Ok(())
    }
}
