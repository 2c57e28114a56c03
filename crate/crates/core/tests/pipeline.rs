mod support;

use std::sync::Arc;

use kgteam::backend::{
    BackendError, BackendFailure, Completion, CompletionBackend, CompletionRequest, RecordingBackend, ScriptFile,
    ScriptedBackend,
};
use kgteam::eval::{echo_script, load_dataset};
use kgteam::network::{AgentNode, CollaborationNetwork, CommunicationEdge, NetworkConfig, Transcript};
use kgteam::prompt::{DemoStore, HashingEmbedder, Role};
use kgteam::schema::TaskKind;
use support::*;

const TEAM: [(&str, TaskKind); 3] = [("ner", TaskKind::Ner), ("re", TaskKind::Re), ("ee", TaskKind::Ee)];

fn case_study_backend() -> Arc<ScriptedBackend> {
    Arc::new(ScriptedBackend::load(fixture("scripts/case_study.json")).unwrap())
}

#[test]
fn fixture_corpus_is_schema_compliant() {
    let dataset = load_dataset(fixture("synthetic.jsonl")).unwrap();
    assert_eq!(dataset.len(), 20);
    for rec in &dataset {
        for (_, task) in TEAM {
            let sch = schema(task);
            for item in rec.gold_items(task).unwrap() {
                assert!(sch.is_compliant(&item).unwrap().is_compliant(), "{}: {item}", rec.id);
            }
        }
    }
}

#[test]
fn echo_script_fixture_is_current() {
    let dataset = load_dataset(fixture("synthetic.jsonl")).unwrap();
    let on_disk: ScriptFile =
        serde_json::from_str(&std::fs::read_to_string(fixture("scripts/echo.json")).unwrap()).unwrap();
    assert_eq!(on_disk, echo_script(&dataset, &TEAM));
}

#[test]
fn demo_stores_load() {
    let embedder = HashingEmbedder::default();
    for (name, task) in TEAM {
        let store = DemoStore::load(fixture(&format!("demos/{name}.jsonl")), task, &embedder, None).unwrap();
        assert_eq!(store.examples.len(), 6);
    }
}

#[test]
fn few_shot_prompts_carry_demonstrations() {
    let config = NetworkConfig::load(fixture("network.json")).unwrap();
    let net = config.build(case_study_backend(), Arc::new(HashingEmbedder::default()), Some(2)).unwrap();
    let t = net.run_collaboration(&case_study_input(), 1).unwrap();
    let first = &t.cell(0, "ee").unwrap().messages;
    // two system messages, 1-way 2-shot demo pairs, then the input
    assert_eq!(first.len(), 2 + 2 * 2 + 1);
    assert_eq!(first.iter().filter(|m| m.role == Role::Assistant).count(), 2);
    assert_eq!(first.last().unwrap().content, case_study_input());
    let later = &t.cell(1, "ee").unwrap().messages;
    assert!(later.last().unwrap().content.starts_with("Examples:"));
}

#[test]
fn transcript_survives_disk() {
    let config = NetworkConfig::load(fixture("network.json")).unwrap();
    let net = config.build(case_study_backend(), Arc::new(HashingEmbedder::default()), None).unwrap();
    let t = net.run_collaboration(&case_study_input(), 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.json");
    t.save(&p).unwrap();
    assert_eq!(Transcript::load(&p).unwrap(), t);
}

#[test]
fn capture_then_replay_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let capture = dir.path().join("capture.jsonl");
    let config = NetworkConfig::load(fixture("network.json")).unwrap();
    let inner = ScriptedBackend::load(fixture("scripts/case_study.json")).unwrap();
    let recorded = config
        .build(Arc::new(RecordingBackend::new(inner, &capture).unwrap()), Arc::new(HashingEmbedder::default()), None)
        .unwrap()
        .run_collaboration(&case_study_input(), 4)
        .unwrap();
    let replay = ScriptedBackend::from_capture(&std::fs::read_to_string(&capture).unwrap()).unwrap();
    let replayed = config
        .build(Arc::new(replay), Arc::new(HashingEmbedder::default()), None)
        .unwrap()
        .run_collaboration(&case_study_input(), 4)
        .unwrap();
    assert_eq!(recorded.without_timing(), replayed.without_timing());
}

/// Fails one agent in one round and otherwise defers to the inner backend.
struct Flaky {
    inner: Arc<ScriptedBackend>,
    agent: &'static str,
    round: u32,
}

impl CompletionBackend for Flaky {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendFailure> {
        if request.agent_id == self.agent && request.round == self.round {
            return Err(BackendFailure::single(BackendError::Timeout));
        }
        self.inner.complete(request)
    }

    fn describe(&self) -> String {
        "flaky".into()
    }
}

#[test]
fn backend_failure_yields_empty_replica_and_the_run_continues() {
    let backend: Arc<dyn CompletionBackend> = Arc::new(Flaky { inner: case_study_backend(), agent: "ner", round: 2 });
    let nodes = TEAM.iter().map(|&(id, t)| AgentNode::new(id, schema(t), backend.clone())).collect();
    let t = CollaborationNetwork::build(nodes, None, 4).unwrap().run_collaboration(&case_study_input(), 3).unwrap();
    let cell = t.cell(2, "ner").unwrap();
    assert_eq!(cell.failure, Some(BackendError::Timeout));
    assert_eq!(cell.replica.canonical_text, "[]");
    let ee3 = t.cell(3, "ee").unwrap();
    assert_eq!(ee3.peer_replicas.iter().find(|p| p.agent_id == "ner").unwrap().canonical_text, "[]");
    assert!(t.cell(3, "ner").unwrap().failure.is_none());
    t.check_invariants().unwrap();
}

#[test]
fn chain_topology_routes_one_way() {
    let backend = case_study_backend();
    let nodes = TEAM.iter().map(|&(id, t)| AgentNode::new(id, schema(t), backend.clone())).collect();
    let edges = vec![CommunicationEdge::new("ner", "re"), CommunicationEdge::new("re", "ee")];
    let t = CollaborationNetwork::build(nodes, Some(edges), 4).unwrap().run_collaboration(&case_study_input(), 2).unwrap();
    let peers = |a: &str| t.cell(1, a).unwrap().peer_replicas.iter().map(|p| p.agent_id.clone()).collect::<Vec<_>>();
    assert!(peers("ner").is_empty());
    assert_eq!(peers("re"), ["ner"]);
    assert_eq!(peers("ee"), ["re"]);
    t.check_invariants().unwrap();
}

#[test]
fn single_agent_degenerates_to_self_refinement() {
    let node = AgentNode::new("ee", schema(TaskKind::Ee), case_study_backend());
    let t = CollaborationNetwork::build(vec![node], None, 4).unwrap().run_collaboration(&case_study_input(), 4).unwrap();
    for round in 1..=4 {
        let cell = t.cell(round, "ee").unwrap();
        assert!(cell.peer_replicas.is_empty());
        let pv = &cell.messages[1].content;
        assert!(pv.contains("last round") && !pv.contains("expert agent was"), "{pv}");
    }
}

#[test]
fn strict_typing_leaves_the_case_study_untouched() {
    // No case-study triple has both spans typed by the NER agent in the same
    // round, so strict checking has nothing to reject.
    let mut config = NetworkConfig::load(fixture("network.json")).unwrap();
    let run = |config: &NetworkConfig| {
        config
            .build(case_study_backend(), Arc::new(HashingEmbedder::default()), None)
            .unwrap()
            .run_collaboration(&case_study_input(), 4)
            .unwrap()
    };
    let lenient = run(&config);
    config.strict_relation_types = true;
    let strict = run(&config);
    assert_eq!(strict.final_outputs, lenient.final_outputs);
    assert!(strict.rounds.iter().all(|r| r.agents.iter().all(|c| c.rejected.is_empty())));
}
