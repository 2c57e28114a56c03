//! Demonstration store and nearest-neighbour N-way K-shot selection.
//!
//! Store files are JSON lines, one demonstration each:
//!
//! ```text
//! {"text": "Ann is French.", "answer": "[(Ann, person-nationality, French)]", "label": "person-nationality"}
//! ```
//!
//! `label` is optional; when absent it is the type label of the first gold
//! item (entity type, relation name or trigger type). Embeddings come from
//! the configured [`Embedder`], or from a sidecar file holding one JSON
//! array per line in store order.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::embed::{euclidean_distance, Embedder};
use super::PromptError;
use crate::records::{parse_result, ExtractionItem};
use crate::schema::TaskKind;

#[derive(Debug, Clone, PartialEq)]
pub struct DemoExample {
    pub text: String,
    pub gold_answer_canonical: String,
    /// Class label used for N-way grouping.
    pub label: String,
    pub embedding: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoStore {
    pub task: TaskKind,
    pub examples: Vec<DemoExample>,
}

#[derive(Deserialize)]
struct DemoLine {
    text: String,
    answer: String,
    #[serde(default)]
    label: Option<String>,
}

fn way_label(item: &ExtractionItem) -> &str {
    match item {
        ExtractionItem::Entity(e) => &e.entity_type,
        ExtractionItem::Relation(r) => &r.relation,
        ExtractionItem::Event(e) => &e.trigger_type,
    }
}

impl DemoStore {
    pub fn from_jsonl(
        source: &str,
        task: TaskKind,
        embedder: &dyn Embedder,
        sidecar: Option<&str>,
    ) -> Result<Self, PromptError> {
        let mut examples = Vec::new();
        for (i, line) in source.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: DemoLine = serde_json::from_str(line)
                .map_err(|e| PromptError::DemoParse { line: i + 1, message: e.to_string() })?;
            let gold = parse_result(task, &parsed.answer);
            if !gold.parse_warnings.is_empty() {
                return Err(PromptError::DemoParse {
                    line: i + 1,
                    message: format!("answer does not parse cleanly: {}", gold.parse_warnings.join("; ")),
                });
            }
            let label = parsed
                .label
                .or_else(|| gold.items.first().map(|it| way_label(it).to_string()))
                .unwrap_or_default();
            examples.push(DemoExample {
                text: parsed.text,
                gold_answer_canonical: parsed.answer,
                label,
                embedding: Vec::new(),
            });
        }
        match sidecar {
            Some(vectors) => {
                let rows: Vec<Vec<f32>> = vectors
                    .lines()
                    .filter(|l| !l.trim().is_empty())
                    .enumerate()
                    .map(|(i, l)| {
                        serde_json::from_str(l)
                            .map_err(|e| PromptError::DemoParse { line: i + 1, message: e.to_string() })
                    })
                    .collect::<Result<_, _>>()?;
                if rows.len() != examples.len() {
                    return Err(PromptError::DemoParse {
                        line: rows.len().min(examples.len()) + 1,
                        message: format!("sidecar has {} vectors for {} demonstrations", rows.len(), examples.len()),
                    });
                }
                for (ex, row) in examples.iter_mut().zip(rows) {
                    ex.embedding = row;
                }
            }
            None => {
                for ex in &mut examples {
                    ex.embedding = embedder.embed(&ex.text)?;
                }
            }
        }
        let store = DemoStore { task, examples };
        store.check_dimensions()?;
        Ok(store)
    }

    pub fn load(
        path: impl AsRef<Path>,
        task: TaskKind,
        embedder: &dyn Embedder,
        sidecar: Option<&Path>,
    ) -> Result<Self, PromptError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p)
                .map_err(|source| PromptError::Io { path: p.display().to_string(), source })
        };
        let source = read(path.as_ref())?;
        let vectors = sidecar.map(read).transpose()?;
        Self::from_jsonl(&source, task, embedder, vectors.as_deref())
    }

    fn check_dimensions(&self) -> Result<(), PromptError> {
        if let Some(first) = self.examples.first() {
            let expected = first.embedding.len();
            if let Some(bad) = self.examples.iter().find(|e| e.embedding.len() != expected) {
                return Err(PromptError::DimensionMismatch { expected, found: bad.embedding.len() });
            }
        }
        Ok(())
    }
}

/// Indices of the chosen demonstrations with their distances, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSelection {
    pub picks: Vec<(usize, f64)>,
    /// Set when a label had fewer than `k_shot` examples (or fewer than
    /// `n_way` labels exist) and the gap was filled with the globally
    /// nearest remaining examples.
    pub fallback: bool,
}

impl DemoSelection {
    pub fn examples(&self, store: &[DemoExample]) -> Vec<DemoExample> {
        self.picks.iter().map(|&(i, _)| store[i].clone()).collect()
    }
}

fn by_distance(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

/// Picks `n_way * k_shot` demonstrations: the `n_way` labels whose nearest
/// member is closest to the query, and the `k_shot` nearest examples of each.
/// Ties go to the lower store index; the result is sorted by distance.
pub fn select_demonstrations(
    store: &[DemoExample],
    query: &[f32],
    n_way: usize,
    k_shot: usize,
) -> Result<DemoSelection, PromptError> {
    if store.is_empty() {
        return Err(PromptError::EmptyStore);
    }
    let wanted = n_way * k_shot;
    if wanted > store.len() {
        return Err(PromptError::TooFewExamples { requested: wanted, available: store.len() });
    }
    if let Some(bad) = store.iter().find(|e| e.embedding.len() != query.len()) {
        return Err(PromptError::DimensionMismatch { expected: query.len(), found: bad.embedding.len() });
    }
    if wanted == 0 {
        return Ok(DemoSelection { picks: Vec::new(), fallback: false });
    }

    let mut by_label: HashMap<&str, Vec<(usize, f64)>> = HashMap::new();
    for (i, ex) in store.iter().enumerate() {
        by_label
            .entry(ex.label.as_str())
            .or_default()
            .push((i, euclidean_distance(&ex.embedding, query)));
    }

    // Nearest k of each label, then rank labels by their nearest member.
    let mut groups: Vec<Vec<(usize, f64)>> = by_label
        .into_values()
        .map(|mut members| {
            if members.len() > k_shot {
                members.select_nth_unstable_by(k_shot - 1, by_distance);
                members.truncate(k_shot);
            }
            members.sort_by(by_distance);
            members
        })
        .collect();
    groups.sort_by(|a, b| by_distance(&a[0], &b[0]));

    let mut fallback = groups.len() < n_way;
    let mut taken = vec![false; store.len()];
    let mut picks = Vec::with_capacity(wanted);
    for members in groups.into_iter().take(n_way) {
        fallback |= members.len() < k_shot;
        for (i, d) in members {
            taken[i] = true;
            picks.push((i, d));
        }
    }

    let missing = wanted - picks.len();
    if missing > 0 {
        let mut rest: Vec<(usize, f64)> = store
            .iter()
            .enumerate()
            .filter(|(i, _)| !taken[*i])
            .map(|(i, ex)| (i, euclidean_distance(&ex.embedding, query)))
            .collect();
        rest.select_nth_unstable_by(missing - 1, by_distance);
        picks.extend(rest.into_iter().take(missing));
    }
    picks.sort_by(by_distance);
    Ok(DemoSelection { picks, fallback })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::HashingEmbedder;

    fn demo(label: &str, embedding: Vec<f32>) -> DemoExample {
        DemoExample { text: String::new(), gold_answer_canonical: "[]".into(), label: label.into(), embedding }
    }

    #[test]
    fn self_is_nearest() {
        let store: Vec<_> = (0..10).map(|i| demo(&format!("l{}", i % 3), vec![i as f32, 1.0])).collect();
        let sel = select_demonstrations(&store, &[4.0, 1.0], 1, 1).unwrap();
        assert_eq!(sel.picks, vec![(4, 0.0)]);
        assert!(!sel.fallback);
    }

    #[test]
    fn equidistant_store_uses_lowest_indices() {
        let store: Vec<_> = (0..12).map(|_| demo("l", vec![1.0, 0.0])).collect();
        let sel = select_demonstrations(&store, &[0.0, 0.0], 1, 4).unwrap();
        assert_eq!(sel.picks.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 1, 2, 3]);

        // With several labels, labels rank by their lowest index and each
        // contributes its own lowest indices.
        let store: Vec<_> = (0..12).map(|i| demo(&format!("l{}", i % 4), vec![1.0, 0.0])).collect();
        let sel = select_demonstrations(&store, &[0.0, 0.0], 2, 2).unwrap();
        assert_eq!(sel.picks.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 1, 4, 5]);
    }

    #[test]
    fn short_label_falls_back() {
        let store = vec![
            demo("a", vec![0.0]),
            demo("b", vec![5.0]),
            demo("b", vec![6.0]),
            demo("c", vec![1.0]),
        ];
        let sel = select_demonstrations(&store, &[0.0], 1, 2).unwrap();
        // label a has one member; the nearest remaining example (c) fills in.
        assert_eq!(sel.picks.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 3]);
        assert!(sel.fallback);
    }

    #[test]
    fn errors() {
        assert!(matches!(select_demonstrations(&[], &[0.0], 1, 1), Err(PromptError::EmptyStore)));
        let store = vec![demo("a", vec![0.0, 1.0])];
        assert!(matches!(
            select_demonstrations(&store, &[0.0], 1, 1),
            Err(PromptError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            select_demonstrations(&store, &[0.0, 0.0], 1, 2),
            Err(PromptError::TooFewExamples { .. })
        ));
    }

    #[test]
    fn loads_jsonl_store() {
        let source = r#"{"text": "Ann is French.", "answer": "[(Ann, person-nationality, French)]"}
{"text": "Bob lives in Rome.", "answer": "[(Bob, person-place_lived, Rome)]", "label": "lived"}
"#;
        let store = DemoStore::from_jsonl(source, TaskKind::Re, &HashingEmbedder::default(), None).unwrap();
        assert_eq!(store.examples.len(), 2);
        assert_eq!(store.examples[0].label, "person-nationality");
        assert_eq!(store.examples[1].label, "lived");
        assert_eq!(store.examples[0].embedding.len(), 256);

        let sidecar = "[1.0, 0.0]\n[0.0, 1.0]\n";
        let store = DemoStore::from_jsonl(source, TaskKind::Re, &HashingEmbedder::default(), Some(sidecar)).unwrap();
        assert_eq!(store.examples[1].embedding, vec![0.0, 1.0]);

        let bad = r#"{"text": "x", "answer": "[(broken"}"#;
        assert!(matches!(
            DemoStore::from_jsonl(bad, TaskKind::Re, &HashingEmbedder::default(), None),
            Err(PromptError::DemoParse { line: 1, .. })
        ));
    }
}
