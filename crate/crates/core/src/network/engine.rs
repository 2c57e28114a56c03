use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use super::transcript::{AgentInfo, AgentRound, FinalAnswer, PeerReplica, RoundRecord, Timing, Transcript, TRANSCRIPT_VERSION};
use super::{AgentNode, CollaborationNetwork, NetworkError};
use crate::backend::{BackendFailure, Completion, CompletionRequest};
use crate::prompt::{assemble_initial, assemble_round, select_demonstrations, ChatMessage, CollabContext, PromptBundle};
use crate::records::{parse_result, serialize, simplify_with, ExtractionItem, Replica};
use crate::schema::{Compliance, ComplianceContext, SchemaSpec, SchemaError, SpanTypes, TaskKind};

/// Final filtering pass: keeps the schema-compliant items of a replica.
pub fn filter_ans(replica: &Replica, schema: &SchemaSpec) -> Result<FinalAnswer, NetworkError> {
    if replica.task != schema.task {
        return Err(SchemaError::TaskMismatch { schema: schema.task, item: replica.task }.into());
    }
    let mut items = Vec::with_capacity(replica.items.len());
    for item in &replica.items {
        if schema.is_compliant(item)? == Compliance::Compliant {
            items.push(item.clone());
        }
    }
    let canonical_text = serialize(&items, schema.task)?;
    Ok(FinalAnswer { agent_id: replica.agent_id.clone(), task: replica.task, items, canonical_text })
}

struct Pending {
    messages: Vec<ChatMessage>,
    peers: Vec<PeerReplica>,
    assembled_seq: u64,
}

struct Finished {
    outcome: Result<Completion, BackendFailure>,
    elapsed_ms: u64,
}

impl CollaborationNetwork {
    /// Replica queue for `receiver`: the replicas of every agent with an edge
    /// into it, ascending by sender id. The receiver's own replica is never
    /// included.
    pub fn transfer(
        &self,
        round_replicas: &BTreeMap<String, Replica>,
        receiver: &str,
    ) -> Result<Vec<Replica>, NetworkError> {
        self.in_neighbours(receiver)
            .filter(|&sender| sender != receiver)
            .map(|sender| {
                round_replicas.get(sender).cloned().ok_or_else(|| NetworkError::IncompleteRound {
                    receiver: receiver.to_string(),
                    sender: sender.to_string(),
                })
            })
            .collect()
    }

    fn bundle_for(&self, node: &AgentNode, input: &str) -> Result<PromptBundle, NetworkError> {
        let demonstrations = match (&node.demos, node.k_shot) {
            (Some(store), k) if k > 0 && node.n_way > 0 => {
                let query = self.embedder.embed(input)?;
                let selection = select_demonstrations(&store.examples, &query, node.n_way, k)?;
                if selection.fallback {
                    tracing::debug!(agent = %node.agent_id, "demonstration selection fell back to global neighbours");
                }
                selection.examples(&store.examples)
            }
            _ => Vec::new(),
        };
        Ok(PromptBundle::new(&node.schema, node.opening_override.as_deref(), demonstrations))
    }

    /// Runs the collaboration on one input for `rounds` refinement rounds.
    pub fn run_collaboration(&self, input: &str, rounds: u32) -> Result<Transcript, NetworkError> {
        if input.trim().is_empty() {
            return Err(NetworkError::EmptyInput);
        }
        if rounds > self.max_rounds {
            return Err(NetworkError::RoundsExceeded { requested: rounds, max: self.max_rounds });
        }
        let started = Instant::now();
        let started_at = chrono::Utc::now().to_rfc3339();
        let bundles: Vec<PromptBundle> =
            self.nodes.iter().map(|n| self.bundle_for(n, input)).collect::<Result<_, _>>()?;

        let mut clock = 0u64;
        let mut records = Vec::with_capacity(rounds as usize + 1);
        let mut previous: BTreeMap<String, Replica> = BTreeMap::new();

        for round in 0..=rounds {
            // Assembly happens strictly after the previous round's barrier.
            let mut pending = Vec::with_capacity(self.nodes.len());
            for (node, bundle) in self.nodes.iter().zip(&bundles) {
                let (messages, peers) = if round == 0 {
                    (assemble_initial(input, bundle), Vec::new())
                } else {
                    let queue = self.transfer(&previous, &node.agent_id)?;
                    let ctx = CollabContext {
                        own_last_replica: previous[&node.agent_id].clone(),
                        peer_replicas: queue,
                    };
                    let messages = assemble_round(input, &ctx, bundle)?;
                    let peers = ctx
                        .peer_replicas
                        .iter()
                        .map(|r| PeerReplica { agent_id: r.agent_id.clone(), canonical_text: r.canonical_text.clone() })
                        .collect();
                    (messages, peers)
                };
                clock += 1;
                pending.push(Pending { messages, peers, assembled_seq: clock });
            }

            let finished: Vec<Finished> = self
                .nodes
                .par_iter()
                .zip(pending.par_iter())
                .map(|(node, p)| {
                    let t0 = Instant::now();
                    let outcome = node.backend.complete(&CompletionRequest {
                        agent_id: &node.agent_id,
                        round,
                        input_text: input,
                        messages: &p.messages,
                    });
                    Finished { outcome, elapsed_ms: t0.elapsed().as_millis() as u64 }
                })
                .collect();

            let cells = self.process_round(round, pending, finished, &mut clock)?;
            previous = cells.iter().map(|c| (c.agent_id.clone(), c.replica.clone())).collect();
            records.push(RoundRecord { round, agents: cells });
        }

        let final_outputs = self
            .nodes
            .iter()
            .map(|n| filter_ans(&previous[&n.agent_id], &n.schema))
            .collect::<Result<_, _>>()?;

        Ok(Transcript {
            transcript_version: TRANSCRIPT_VERSION,
            input_text: input.to_string(),
            agents: self
                .nodes
                .iter()
                .map(|n| AgentInfo { agent_id: n.agent_id.clone(), task: n.task, schema_id: n.schema.id.clone() })
                .collect(),
            edges: self.edges.iter().map(|e| (e.from.clone(), e.to.clone())).collect(),
            rounds: records,
            final_outputs,
            timing: Some(Timing { started_at, elapsed_ms: started.elapsed().as_millis() as u64 }),
        })
    }

    /// Parses and simplifies every response of a round. NER agents go first
    /// so strict relation checking can type spans from this round's entities.
    fn process_round(
        &self,
        round: u32,
        pending: Vec<Pending>,
        finished: Vec<Finished>,
        clock: &mut u64,
    ) -> Result<Vec<AgentRound>, NetworkError> {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by_key(|&i| (self.nodes[i].task != TaskKind::Ner, i));

        let mut span_types = SpanTypes::new();
        let mut cells: Vec<Option<AgentRound>> = vec![None; self.nodes.len()];
        let mut pending: Vec<Option<Pending>> = pending.into_iter().map(Some).collect();
        let mut finished: Vec<Option<Finished>> = finished.into_iter().map(Some).collect();

        for i in order {
            let node = &self.nodes[i];
            let p = pending[i].take().expect("one pending prompt per agent");
            let f = finished[i].take().expect("one completion per agent");
            let (raw, attempts, failure) = match f.outcome {
                Ok(c) => (c.text, c.attempts, None),
                Err(e) => {
                    tracing::warn!(agent = %node.agent_id, round, error = %e, "agent failed this round");
                    (String::new(), e.attempts, Some(e.error))
                }
            };
            let parsed = parse_result(node.task, &raw);
            let ctx = ComplianceContext {
                strict_relation_types: self.strict_relation_types,
                span_types: Some(&span_types),
            };
            let (replica, rejected) = simplify_with(&parsed, &node.schema, ctx, &node.agent_id, round)?;
            if node.task == TaskKind::Ner {
                for item in &replica.items {
                    if let ExtractionItem::Entity(e) = item {
                        span_types.entry(e.span.clone()).or_insert_with(|| e.entity_type.clone());
                    }
                }
            }
            *clock += 1;
            cells[i] = Some(AgentRound {
                agent_id: node.agent_id.clone(),
                task: node.task,
                peer_replicas: p.peers,
                messages: p.messages,
                raw_response: raw,
                parse_warnings: parsed.parse_warnings,
                rejected,
                replica,
                attempts,
                failure,
                assembled_seq: p.assembled_seq,
                replica_seq: *clock,
                elapsed_ms: Some(f.elapsed_ms),
            });
        }
        Ok(cells.into_iter().map(|c| c.expect("every agent processed")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::schema;
    use super::super::{AgentNode, CommunicationEdge};
    use super::*;
    use crate::backend::{CompletionBackend, ScriptedBackend};
    use std::sync::Arc;

    fn trio(backend: Arc<dyn CompletionBackend>) -> CollaborationNetwork {
        CollaborationNetwork::build(
            vec![
                AgentNode::new("ner", schema(TaskKind::Ner), backend.clone()),
                AgentNode::new("re", schema(TaskKind::Re), backend.clone()),
                AgentNode::new("ee", schema(TaskKind::Ee), backend),
            ],
            None,
            4,
        )
        .unwrap()
    }

    fn replicas(ids: &[&str]) -> BTreeMap<String, Replica> {
        ids.iter().map(|id| (id.to_string(), Replica::empty(*id, 0, TaskKind::Ner))).collect()
    }

    #[test]
    fn transfer_excludes_receiver() {
        let net = trio(Arc::new(ScriptedBackend::new()));
        let queue = net.transfer(&replicas(&["ner", "re", "ee"]), "ner").unwrap();
        let ids: Vec<&str> = queue.iter().map(|r| r.agent_id.as_str()).collect();
        assert_eq!(ids, vec!["ee", "re"]);
    }

    #[test]
    fn transfer_follows_edges() {
        let b: Arc<dyn CompletionBackend> = Arc::new(ScriptedBackend::new());
        let nodes = ["a", "b", "c", "d"]
            .iter()
            .map(|id| AgentNode::new(*id, schema(TaskKind::Ner), b.clone()))
            .collect();
        let mut edges: Vec<CommunicationEdge> = Vec::new();
        for from in ["a", "b", "c", "d"] {
            for to in ["a", "b", "c", "d"] {
                if from != to && !(from == "b" && to == "d") {
                    edges.push(CommunicationEdge::new(from, to));
                }
            }
        }
        let net = CollaborationNetwork::build(nodes, Some(edges), 4).unwrap();
        let all = replicas(&["a", "b", "c", "d"]);
        let ids: Vec<String> = net.transfer(&all, "d").unwrap().into_iter().map(|r| r.agent_id).collect();
        assert_eq!(ids, vec!["a", "c"]);

        let lonely = CollaborationNetwork::build(
            vec![AgentNode::new("x", schema(TaskKind::Ner), b.clone()), AgentNode::new("y", schema(TaskKind::Ner), b)],
            Some(vec![CommunicationEdge::new("x", "y")]),
            4,
        )
        .unwrap();
        assert!(lonely.transfer(&replicas(&["x", "y"]), "x").unwrap().is_empty());
        assert!(matches!(
            lonely.transfer(&replicas(&["y"]), "y"),
            Err(NetworkError::IncompleteRound { .. })
        ));
    }

    #[test]
    fn zero_rounds() {
        let b = ScriptedBackend::new()
            .with_response("ner", 0, "(PER, Ann), (CITY, Rome)")
            .with_response("re", 0, "[]")
            .with_response("ee", 0, "[]");
        let t = trio(Arc::new(b)).run_collaboration("Ann went to Rome.", 0).unwrap();
        assert_eq!(t.rounds.len(), 1);
        assert_eq!(t.final_answer("ner").unwrap().canonical_text, "[(PER, Ann)]");
        assert_eq!(t.cell(0, "ner").unwrap().rejected.len(), 1);
        t.check_invariants().unwrap();
    }

    #[test]
    fn input_and_round_limits() {
        let net = trio(Arc::new(ScriptedBackend::new()));
        assert!(matches!(net.run_collaboration("  ", 1), Err(NetworkError::EmptyInput)));
        assert!(matches!(net.run_collaboration("x", 5), Err(NetworkError::RoundsExceeded { .. })));
    }

    #[test]
    fn failures_become_empty_replicas() {
        // only the NER agent has a script; the others fail every round.
        let b = ScriptedBackend::new().with_response("ner", 0, "(PER, Ann)").with_response("ner", 1, "(PER, Ann)");
        let t = trio(Arc::new(b)).run_collaboration("Ann.", 1).unwrap();
        let re = t.cell(1, "re").unwrap();
        assert!(re.failure.is_some());
        assert_eq!(re.replica.canonical_text, "[]");
        let ner = t.cell(1, "ner").unwrap();
        assert!(ner.peer_replicas.iter().all(|p| p.canonical_text == "[]"));
        t.check_invariants().unwrap();
    }

    #[test]
    fn strict_mode_types_relation_spans() {
        let b = ScriptedBackend::new()
            .with_response("ner", 0, "(ORG, Acme), (LOC, Rome)")
            .with_response("re", 0, "(Acme, person-nationality, Rome)")
            .with_response("ee", 0, "[]");
        let net = trio(Arc::new(b));
        let lenient = net.run_collaboration("Acme in Rome.", 0).unwrap();
        assert_eq!(lenient.final_answer("re").unwrap().items.len(), 1);
        let strict = net.with_strict_relation_types(true).run_collaboration("Acme in Rome.", 0).unwrap();
        assert!(strict.final_answer("re").unwrap().items.is_empty());
        assert_eq!(strict.cell(0, "re").unwrap().rejected.len(), 1);
    }

    #[test]
    fn filter_ans_cases() {
        let re = schema(TaskKind::Re);
        let ok = Replica {
            agent_id: "re".into(),
            round: 0,
            task: TaskKind::Re,
            items: vec![ExtractionItem::Relation(crate::records::RelationTriple::new("a", "person-nationality", "b"))],
            canonical_text: "[(a, person-nationality, b)]".into(),
        };
        assert_eq!(filter_ans(&ok, &re).unwrap().items, ok.items);
        let mut bad = ok.clone();
        bad.items.push(ExtractionItem::Relation(crate::records::RelationTriple::new("a", "founded", "b")));
        assert_eq!(filter_ans(&bad, &re).unwrap().items, ok.items);
        assert!(filter_ans(&Replica::empty("re", 0, TaskKind::Re), &re).unwrap().items.is_empty());
        assert!(filter_ans(&Replica::empty("ner", 0, TaskKind::Ner), &re).is_err());
    }
}
