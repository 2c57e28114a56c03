use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;

use super::{EntityMention, EventArgument, EventRecord, ExtractionItem, ExtractionResult, RelationTriple};
use crate::schema::TaskKind;
use crate::text::collapse_whitespace;

const QUOTES: [char; 7] = ['"', '\'', '`', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}'];

/// Parses a raw response into items. Total: malformed fragments become
/// warnings, prose around the answer list is ignored, exact duplicates are
/// dropped keeping the first occurrence.
pub fn parse_result(task: TaskKind, raw: &str) -> ExtractionResult {
    let mut warnings = Vec::new();
    let parsed = match task {
        TaskKind::Ner => parse_entities(raw, &mut warnings),
        TaskKind::Re => parse_relations(raw, &mut warnings),
        TaskKind::Ee => parse_events(raw, &mut warnings),
    };
    let mut seen = HashSet::new();
    let items = parsed.into_iter().filter(|item| seen.insert(item.clone())).collect();
    ExtractionResult { task, items, raw_text: raw.to_string(), parse_warnings: warnings }
}

/// Outermost `open ... close` groups, nesting of the same pair respected.
fn groups(text: &str, open: char, close: char, warnings: &mut Vec<String>) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in text.char_indices() {
        if c == open {
            if depth == 0 {
                start = i + c.len_utf8();
            }
            depth += 1;
        } else if c == close && depth > 0 {
            depth -= 1;
            if depth == 0 {
                out.push((start, text[start..i].to_string()));
            }
        }
    }
    if depth > 0 {
        warnings.push(format!("unclosed `{open}` at byte {}", start - open.len_utf8()));
    }
    out
}

/// Byte offsets of commas not nested inside any bracket pair.
fn top_level_commas(s: &str) -> Vec<usize> {
    let mut depth = 0i32;
    let mut out = Vec::new();
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth <= 0 => out.push(i),
            _ => {}
        }
    }
    out
}

/// Whitespace-collapsed field with surrounding quote pairs removed.
fn clean(field: &str) -> String {
    let mut s = collapse_whitespace(field);
    loop {
        let mut chars = s.chars();
        let (Some(first), Some(last)) = (chars.next(), chars.next_back()) else {
            return s;
        };
        if QUOTES.contains(&first) && QUOTES.contains(&last) {
            let inner = &s[first.len_utf8()..s.len() - last.len_utf8()];
            s = collapse_whitespace(inner);
        } else {
            return s;
        }
    }
}

fn split_label_pair(content: &str) -> Option<(String, String)> {
    let cut = content
        .char_indices()
        .find(|&(_, c)| c == ',' || c == ':')
        .map(|(i, _)| i)?;
    let label = clean(&content[..cut]);
    let value = clean(&content[cut + 1..]);
    (!label.is_empty() && !value.is_empty()).then_some((label, value))
}

fn parse_entities(raw: &str, warnings: &mut Vec<String>) -> Vec<ExtractionItem> {
    let mut items = Vec::new();
    for (at, content) in groups(raw, '(', ')', warnings) {
        // Type labels carry no comma, so the span is everything after the
        // first separator.
        let commas = top_level_commas(&content);
        let pair = match commas.first() {
            Some(&c) => {
                let (t, s) = (clean(&content[..c]), clean(&content[c + 1..]));
                (!t.is_empty() && !s.is_empty()).then_some((t, s))
            }
            None => split_label_pair(&content),
        };
        match pair {
            Some((entity_type, span)) if !entity_type.contains(char::is_whitespace) => {
                if commas.len() > 1 {
                    warnings.push(format!(
                        "entity at byte {at}: span `{span}` contains commas; kept as one span"
                    ));
                }
                items.push(ExtractionItem::Entity(EntityMention { entity_type, span }));
            }
            _ => warnings.push(format!("malformed entity at byte {at}: `({content})`")),
        }
    }
    items
}

fn parse_relations(raw: &str, warnings: &mut Vec<String>) -> Vec<ExtractionItem> {
    let mut items = Vec::new();
    for (at, content) in groups(raw, '(', ')', warnings) {
        let commas = top_level_commas(&content);
        if commas.len() < 2 {
            warnings.push(format!("malformed relation at byte {at}: `({content})`"));
            continue;
        }
        // Relation slot k sits between commas[k-1] and commas[k].
        let slot = |k: usize| clean(&content[commas[k - 1] + 1..commas[k]]);
        let pick = if commas.len() == 2 {
            1
        } else {
            let candidates: Vec<usize> = (1..commas.len())
                .filter(|&k| {
                    let r = slot(k);
                    !r.is_empty() && !r.contains(char::is_whitespace)
                })
                .collect();
            match candidates.as_slice() {
                [only] => *only,
                _ => {
                    // Longest-span reading: the split leaving the longest head or tail.
                    let pool = if candidates.is_empty() { (1..commas.len()).collect() } else { candidates };
                    let best = pool
                        .iter()
                        .copied()
                        .max_by_key(|&k| {
                            let longest = commas[k - 1].max(content.len() - commas[k]);
                            (longest, std::cmp::Reverse(k))
                        })
                        .expect("at least one slot");
                    warnings.push(format!(
                        "ambiguous relation at byte {at}: `({content})`; kept longest-span reading"
                    ));
                    best
                }
            }
        };
        let head = clean(&content[..commas[pick - 1]]);
        let relation = slot(pick);
        let tail = clean(&content[commas[pick] + 1..]);
        if head.is_empty() || relation.is_empty() || tail.is_empty() {
            warnings.push(format!("malformed relation at byte {at}: `({content})`"));
            continue;
        }
        items.push(ExtractionItem::Relation(RelationTriple { head, relation, tail }));
    }
    items
}

fn event_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| {
        Regex::new(
            r"(?is)^\s*trigger\s*type\s*:\s*(?P<tt>.*?)\s*,\s*trigger\s*word\s*:\s*(?P<tw>.*?)\s*(?:,\s*arguments\s*:\s*(?P<args>.*?))?\s*$",
        )
        .expect("valid event pattern")
    })
}

fn parse_events(raw: &str, warnings: &mut Vec<String>) -> Vec<ExtractionItem> {
    let mut items = Vec::new();
    let blocks = groups(raw, '{', '}', warnings);
    if blocks.is_empty() && raw.to_ascii_lowercase().contains("trigger type") {
        warnings.push("event keys found outside any `{...}` block".to_string());
    }
    for (at, content) in blocks {
        let Some(caps) = event_pattern().captures(&content) else {
            warnings.push(format!("malformed event at byte {at}: `{{{content}}}`"));
            continue;
        };
        let trigger_type = clean(&caps["tt"]);
        let trigger_word = clean(&caps["tw"]);
        if trigger_type.is_empty() || trigger_word.is_empty() {
            warnings.push(format!("event at byte {at} lacks a trigger type or word"));
            continue;
        }
        let mut arguments: Vec<EventArgument> = Vec::new();
        if let Some(args) = caps.name("args") {
            for (arg_at, arg) in groups(args.as_str(), '(', ')', warnings) {
                // Accepts both `(Role, span)` and `(Role: span)`.
                match split_label_pair(&arg) {
                    Some((role, span)) => {
                        let a = EventArgument { role, span };
                        if arguments.contains(&a) {
                            warnings.push(format!("duplicate argument `({}, {})` dropped", a.role, a.span));
                        } else {
                            arguments.push(a);
                        }
                    }
                    None => warnings.push(format!(
                        "malformed argument at byte {} of event at byte {at}: `({arg})`",
                        arg_at
                    )),
                }
            }
        }
        items.push(ExtractionItem::Event(EventRecord { trigger_type, trigger_word, arguments }));
    }
    items
}
