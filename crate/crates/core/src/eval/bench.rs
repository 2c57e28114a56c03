//! Benchmark sweeps over round counts and repetitions.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{match_components, micro_f1, Component, DatasetRecord, EvalError, MatchCounts, MatchOptions, Prf};
use crate::backend::{ScriptFile, ScriptRule};
use crate::network::{filter_ans, CollaborationNetwork, Transcript};
use crate::schema::TaskKind;

pub const REPORT_VERSION: u32 = 1;

const EVENT_SCORING: &str = "pooled: one element per trigger plus one per argument";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub rounds_list: Vec<u32>,
    pub repetitions: usize,
    /// Upper bound on concurrently running records.
    pub jobs: usize,
    pub match_options: MatchOptions,
    /// Recorded in the fingerprint; the backend applies it.
    pub seed: Option<u64>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self { rounds_list: vec![4], repetitions: 3, jobs: 1, match_options: MatchOptions::default(), seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerprintAgent {
    pub agent_id: String,
    pub task: TaskKind,
    pub schema_id: String,
    pub schema_sha256: String,
    pub n_way: usize,
    pub k_shot: usize,
    pub demo_count: usize,
    pub backend: String,
}

/// Everything that determines a report's numbers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigFingerprint {
    pub team: Vec<FingerprintAgent>,
    pub edges: Vec<(String, String)>,
    pub strict_relation_types: bool,
    pub rounds_list: Vec<u32>,
    pub repetitions: usize,
    pub match_options: MatchOptions,
    pub seed: Option<u64>,
    pub dataset_records: usize,
    pub dataset_sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ConfigFingerprint {
    pub fn new(network: &CollaborationNetwork, dataset: &[DatasetRecord], opts: &BenchOptions) -> Self {
        let team = network
            .nodes()
            .iter()
            .map(|n| FingerprintAgent {
                agent_id: n.agent_id.clone(),
                task: n.task,
                schema_id: n.schema.id.clone(),
                schema_sha256: sha256_hex(n.schema.to_json().as_bytes()),
                n_way: n.n_way,
                k_shot: n.k_shot,
                demo_count: n.demos.as_ref().map_or(0, |d| d.examples.len()),
                backend: n.backend.describe(),
            })
            .collect();
        Self {
            team,
            edges: network.edges().iter().map(|e| (e.from.clone(), e.to.clone())).collect(),
            strict_relation_types: network.strict_relation_types(),
            rounds_list: opts.rounds_list.clone(),
            repetitions: opts.repetitions,
            match_options: opts.match_options,
            seed: opts.seed,
            dataset_records: dataset.len(),
            dataset_sha256: sha256_hex(serde_json::to_string(dataset).expect("dataset serializes").as_bytes()),
        }
    }

    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("fingerprint serializes").as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepetitionScore {
    pub counts: MatchCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RepetitionScore {
    fn from_counts(counts: MatchCounts) -> Self {
        let Prf { precision, recall, f1 } = micro_f1(counts);
        Self { counts, precision, recall, f1 }
    }
}

/// Event trigger and argument scores, each averaged over repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentScores {
    pub trigger: Prf,
    pub argument: Prf,
}

/// Scores of one agent after `rounds` refinement rounds. `precision`,
/// `recall` and `f1` are arithmetic means over repetitions; each repetition
/// is micro-averaged over the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: TaskKind,
    pub agent_id: String,
    pub rounds: u32,
    pub samples: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub repetitions: Vec<RepetitionScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<ComponentScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub report_version: u32,
    pub generated_at: String,
    pub fingerprint: String,
    pub config: ConfigFingerprint,
    pub event_scoring: String,
    /// Completions that failed after retries and were scored as empty.
    pub backend_failures: u64,
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn row(&self, agent_id: &str, rounds: u32) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.agent_id == agent_id && r.rounds == rounds)
    }

    /// Writes `report.json`, `report.txt` and `curve.csv` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), EvalError> {
        let dir = dir.as_ref();
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| EvalError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, body) in
            [("report.json", self.to_json()), ("report.txt", render_table(self)), ("curve.csv", render_csv(self))]
        {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(io(&path))?;
        }
        Ok(())
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn mean_prf(scores: &[RepetitionScore]) -> Prf {
    Prf {
        precision: mean(scores.iter().map(|s| s.precision)),
        recall: mean(scores.iter().map(|s| s.recall)),
        f1: mean(scores.iter().map(|s| s.f1)),
    }
}

#[derive(Default, Clone)]
struct Cell {
    by_component: HashMap<Component, MatchCounts>,
}

impl Cell {
    fn total(&self) -> MatchCounts {
        self.by_component.values().copied().sum()
    }
    fn component(&self, c: Component) -> MatchCounts {
        self.by_component.get(&c).copied().unwrap_or_default()
    }
}

/// Runs every record for `max(rounds_list)` rounds and scores the filtered
/// answer of every agent at each requested round count. Rounds never look
/// ahead, so the round-r prefix of a longer run is the r-round run.
pub fn run_benchmark(
    network: &CollaborationNetwork,
    dataset: &[DatasetRecord],
    opts: &BenchOptions,
) -> Result<EvalReport, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    if opts.repetitions == 0 {
        return Err(EvalError::Invalid("repetitions must be at least 1".into()));
    }
    if opts.jobs == 0 {
        return Err(EvalError::Invalid("jobs must be at least 1".into()));
    }
    let mut rounds_list = opts.rounds_list.clone();
    rounds_list.sort_unstable();
    rounds_list.dedup();
    let Some(&max_rounds) = rounds_list.last() else {
        return Err(EvalError::Invalid("empty rounds list".into()));
    };
    if max_rounds > network.max_rounds() {
        return Err(EvalError::Invalid(format!(
            "rounds {max_rounds} exceeds the network maximum {}",
            network.max_rounds()
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| EvalError::Invalid(format!("thread pool: {e}")))?;

    let nodes = network.nodes();
    let mut cells = vec![vec![vec![Cell::default(); rounds_list.len()]; nodes.len()]; opts.repetitions];
    let mut backend_failures = 0u64;

    for rep_cells in cells.iter_mut() {
        let transcripts: Vec<Transcript> = pool.install(|| {
            dataset
                .par_iter()
                .map(|rec| {
                    network
                        .run_collaboration(&rec.text, max_rounds)
                        .map_err(|source| EvalError::Record { record_id: rec.id.clone(), source })
                })
                .collect::<Result<_, _>>()
        })?;
        for (rec, transcript) in dataset.iter().zip(&transcripts) {
            backend_failures += transcript
                .rounds
                .iter()
                .flat_map(|r| &r.agents)
                .filter(|c| c.failure.is_some())
                .count() as u64;
            for (ni, node) in nodes.iter().enumerate() {
                let Some(gold) = rec.gold_items(node.task) else { continue };
                for (ri, &round) in rounds_list.iter().enumerate() {
                    let cell = transcript.cell(round, &node.agent_id).expect("every agent runs every round");
                    let answer = filter_ans(&cell.replica, &node.schema)
                        .map_err(|source| EvalError::Record { record_id: rec.id.clone(), source })?;
                    let counts = match_components(&answer.items, &gold, node.task, opts.match_options)?;
                    let acc = &mut rep_cells[ni][ri].by_component;
                    for (component, c) in counts {
                        *acc.entry(component).or_default() += c;
                    }
                }
            }
        }
    }

    let mut rows = Vec::new();
    for (ni, node) in nodes.iter().enumerate() {
        let samples = dataset.iter().filter(|r| r.gold_items(node.task).is_some()).count();
        for (ri, &rounds) in rounds_list.iter().enumerate() {
            let per_rep: Vec<&Cell> = cells.iter().map(|rep| &rep[ni][ri]).collect();
            let repetitions: Vec<RepetitionScore> =
                per_rep.iter().map(|c| RepetitionScore::from_counts(c.total())).collect();
            let components = (node.task == TaskKind::Ee).then(|| {
                let part = |k| {
                    let s: Vec<RepetitionScore> =
                        per_rep.iter().map(|c| RepetitionScore::from_counts(c.component(k))).collect();
                    mean_prf(&s)
                };
                ComponentScores { trigger: part(Component::Trigger), argument: part(Component::Argument) }
            });
            let Prf { precision, recall, f1 } = mean_prf(&repetitions);
            rows.push(ReportRow {
                task: node.task,
                agent_id: node.agent_id.clone(),
                rounds,
                samples,
                precision,
                recall,
                f1,
                repetitions,
                components,
            });
        }
    }

    let config = ConfigFingerprint::new(network, dataset, opts);
    Ok(EvalReport {
        report_version: REPORT_VERSION,
        generated_at: chrono::Utc::now().to_rfc3339(),
        fingerprint: config.digest(),
        config,
        event_scoring: EVENT_SCORING.into(),
        backend_failures,
        rows,
    })
}

/// Aligned plain-text summary table.
pub fn render_table(report: &EvalReport) -> String {
    let header = ["task", "agent", "rounds", "samples", "P", "R", "F1", "F1 per repetition"];
    let mut lines: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in &report.rows {
        lines.push(vec![
            r.task.code().to_string(),
            r.agent_id.clone(),
            r.rounds.to_string(),
            r.samples.to_string(),
            format!("{:.4}", r.precision),
            format!("{:.4}", r.recall),
            format!("{:.4}", r.f1),
            r.repetitions.iter().map(|s| format!("{:.4}", s.f1)).collect::<Vec<_>>().join(" "),
        ]);
    }
    let widths: Vec<usize> =
        (0..header.len()).map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for line in &lines {
        let cols: Vec<String> = line.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
        let _ = writeln!(out, "{}", cols.join("  ").trim_end());
    }
    let events: Vec<&ReportRow> = report.rows.iter().filter(|r| r.components.is_some()).collect();
    if !events.is_empty() {
        let _ = writeln!(out, "\nevent components (F1, {}):", report.event_scoring);
        for r in events {
            let c = r.components.expect("filtered");
            let _ = writeln!(
                out,
                "  {} rounds={}  trigger={:.4}  argument={:.4}",
                r.agent_id, r.rounds, c.trigger.f1, c.argument.f1
            );
        }
    }
    let _ = writeln!(out, "\nfingerprint {}", report.fingerprint);
    out
}

/// Per-round curve: one line per report row.
pub fn render_csv(report: &EvalReport) -> String {
    let mut out = String::from("task,agent,rounds,samples,precision,recall,f1\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6}",
            r.task.code(),
            r.agent_id,
            r.rounds,
            r.samples,
            r.precision,
            r.recall,
            r.f1
        );
    }
    out
}

/// Script that answers every agent with its task's gold canonical text for
/// every record, at every round.
pub fn echo_script(dataset: &[DatasetRecord], agents: &[(&str, TaskKind)]) -> ScriptFile {
    let mut rules = Vec::new();
    for rec in dataset {
        for &(agent, task) in agents {
            rules.push(ScriptRule {
                agent: Some(agent.to_string()),
                input_equals: Some(rec.text.clone()),
                text: rec.gold_canonical(task),
                ..Default::default()
            });
        }
    }
    ScriptFile { script_version: 1, responses: Vec::new(), rules }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{CompletionBackend, ScriptedBackend};
    use crate::eval::parse_dataset;
    use crate::network::AgentNode;
    use crate::schema::SchemaSpec;
    use std::sync::Arc;

    fn schema(task: TaskKind) -> Arc<SchemaSpec> {
        let json = match task {
            TaskKind::Ner => r#"{"schema_version":1,"id":"n","task":"NER","entity_types":["PER","LOC"]}"#,
            TaskKind::Re => {
                r#"{"schema_version":1,"id":"r","task":"RE","relation_constraints":[{"relation":"lives_in","head":"PER","tail":"LOC"}]}"#
            }
            TaskKind::Ee => {
                r#"{"schema_version":1,"id":"e","task":"EE","event_types":[{"event_type":"Movement:Transport","roles":["Artifact","Destination"]}]}"#
            }
        };
        Arc::new(SchemaSpec::from_json(json).unwrap())
    }

    const AGENTS: [(&str, TaskKind); 3] = [("ner", TaskKind::Ner), ("re", TaskKind::Re), ("ee", TaskKind::Ee)];

    fn team(backend: Arc<dyn CompletionBackend>) -> CollaborationNetwork {
        let nodes = AGENTS.iter().map(|&(id, t)| AgentNode::new(id, schema(t), backend.clone())).collect();
        CollaborationNetwork::build(nodes, None, 4).unwrap()
    }

    fn dataset() -> Vec<DatasetRecord> {
        parse_dataset(concat!(
            r#"{"id": "1", "text": "Ann went to Rome.", "gold": {"entities": [{"type": "PER", "span": "Ann"}, {"type": "LOC", "span": "Rome"}], "relations": [], "events": [{"trigger_type": "Movement:Transport", "trigger_word": "went", "arguments": [{"role": "Artifact", "span": "Ann"}, {"role": "Destination", "span": "Rome"}]}]}}"#,
            "\n",
            r#"{"id": "2", "text": "Bo lives in Oslo.", "gold": {"entities": [{"type": "PER", "span": "Bo"}, {"type": "LOC", "span": "Oslo"}], "relations": [{"head": "Bo", "relation": "lives_in", "tail": "Oslo"}], "events": []}}"#,
            "\n"
        ))
        .unwrap()
    }

    fn opts(rounds_list: Vec<u32>) -> BenchOptions {
        BenchOptions { rounds_list, repetitions: 2, jobs: 2, ..Default::default() }
    }

    #[test]
    fn echo_scores_perfectly() {
        let ds = dataset();
        let backend = ScriptedBackend::from_script(echo_script(&ds, &AGENTS)).unwrap();
        let report = run_benchmark(&team(Arc::new(backend)), &ds, &opts(vec![0, 2, 4])).unwrap();
        assert_eq!(report.rows.len(), 9);
        for row in &report.rows {
            assert_eq!(row.f1, 1.0, "{row:?}");
            assert_eq!(row.repetitions.len(), 2);
        }
        let ee = report.row("ee", 4).unwrap().components.unwrap();
        assert_eq!((ee.trigger.f1, ee.argument.f1), (1.0, 1.0));
        assert_eq!(report.backend_failures, 0);
    }

    #[test]
    fn empty_answers_score_zero() {
        let backend = ScriptedBackend::new().with_rule(ScriptRule { text: "[]".into(), ..Default::default() }).unwrap();
        let ds = dataset();
        let report = run_benchmark(&team(Arc::new(backend)), &ds, &opts(vec![1])).unwrap();
        let ner = report.row("ner", 1).unwrap();
        assert_eq!(ner.f1, 0.0);
        assert_eq!(ner.repetitions[0].counts, MatchCounts::new(0, 0, 4));
        // trigger + 2 arguments
        assert_eq!(report.row("ee", 1).unwrap().repetitions[0].counts.false_negatives, 3);
    }

    #[test]
    fn round_curve_rises_then_holds() {
        // NER finds one of four entities until round 2, then all four.
        // EE finds the trigger only in rounds 0-2, the full event from round 3.
        let ds = dataset();
        let mut b = ScriptedBackend::new();
        let rule = |agent: &str, round: u32, input: &str, text: &str| ScriptRule {
            agent: Some(agent.into()),
            round: Some(round),
            input_equals: Some(input.into()),
            text: text.into(),
            ..Default::default()
        };
        for round in 0..=4 {
            let (a, bo) = if round < 2 {
                ("[(PER, Ann)]", "[]")
            } else {
                ("[(PER, Ann), (LOC, Rome)]", "[(PER, Bo), (LOC, Oslo)]")
            };
            b = b.with_rule(rule("ner", round, &ds[0].text, a)).unwrap();
            b = b.with_rule(rule("ner", round, &ds[1].text, bo)).unwrap();
            let ev = if round < 3 {
                "[{Trigger Type: Movement:Transport, Trigger Word: went}]".to_string()
            } else {
                ds[0].gold_canonical(TaskKind::Ee)
            };
            b = b.with_rule(rule("ee", round, &ds[0].text, &ev)).unwrap();
        }
        let b = b.with_rule(ScriptRule { text: "[]".into(), ..Default::default() }).unwrap();
        let report = run_benchmark(&team(Arc::new(b)), &ds, &opts(vec![0, 1, 2, 3, 4])).unwrap();
        let ner: Vec<f64> = (0..=4).map(|r| report.row("ner", r).unwrap().f1).collect();
        // P=1, R=1/4 -> F1 = 2/5
        assert!((ner[0] - 0.4).abs() < 1e-12 && (ner[1] - 0.4).abs() < 1e-12);
        assert_eq!(&ner[2..], &[1.0, 1.0, 1.0]);
        let ee: Vec<f64> = (0..=4).map(|r| report.row("ee", r).unwrap().f1).collect();
        // P=1, R=1/3 -> F1 = 1/2
        assert_eq!(ee, vec![0.5, 0.5, 0.5, 1.0, 1.0]);
    }

    #[test]
    fn round_prefix_matches_direct_run() {
        let ds = dataset();
        let backend = Arc::new(ScriptedBackend::from_script(echo_script(&ds, &AGENTS)).unwrap());
        let net = team(backend);
        let long = net.run_collaboration(&ds[0].text, 4).unwrap().without_timing();
        let short = net.run_collaboration(&ds[0].text, 2).unwrap().without_timing();
        assert_eq!(&long.rounds[..3], &short.rounds[..]);
    }

    #[test]
    fn order_independent_and_deterministic() {
        let mut ds = dataset();
        let backend = Arc::new(ScriptedBackend::from_script(echo_script(&ds[..1], &AGENTS)).unwrap());
        let net = team(backend);
        let a = run_benchmark(&net, &ds, &opts(vec![2])).unwrap();
        ds.reverse();
        let b = run_benchmark(&net, &ds, &opts(vec![2])).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.repetitions, y.repetitions);
        }
        assert_eq!(render_table(&a).lines().count(), render_table(&b).lines().count());
        assert_eq!(render_csv(&a), render_csv(&run_benchmark(&net, &dataset(), &opts(vec![2])).unwrap()));
    }

    #[test]
    fn bad_options() {
        let net = team(Arc::new(ScriptedBackend::new()));
        let ds = dataset();
        assert!(run_benchmark(&net, &ds, &opts(vec![5])).is_err());
        assert!(run_benchmark(&net, &ds, &opts(vec![])).is_err());
        assert!(run_benchmark(&net, &ds, &BenchOptions { repetitions: 0, ..opts(vec![1]) }).is_err());
        assert!(run_benchmark(&net, &[], &opts(vec![1])).is_err());
    }

    #[test]
    fn table_is_aligned() {
        let ds = dataset();
        let backend = ScriptedBackend::from_script(echo_script(&ds, &AGENTS)).unwrap();
        let report = run_benchmark(&team(Arc::new(backend)), &ds, &opts(vec![1])).unwrap();
        let table = render_table(&report);
        let rows: Vec<&str> = table.lines().take(4).collect();
        let col = rows[0].find("F1 per").unwrap();
        assert!(rows[1..].iter().all(|l| l[col..].starts_with("1.0000 1.0000")));
        assert_eq!(render_csv(&report).lines().count(), 4);
    }
}
