use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{paragraph_at, Adg, NodeKind, ADG_SCHEMA};
use crate::report::{Finding, Subject, ValidationReport};
use crate::span::char_len;

/// Hook answering whether a template key resolves in some registry.
pub trait TemplateKeyCheck {
    fn has_template_key(&self, key: &str) -> bool;
}

impl<F: Fn(&str) -> bool> TemplateKeyCheck for F {
    fn has_template_key(&self, key: &str) -> bool {
        self(key)
    }
}

pub fn validate_graph(adg: &Adg) -> ValidationReport {
    validate_graph_with(adg, None)
}

/// Checks every structural invariant of the graph. When `keys` is given,
/// labels used by edges whose template keys do not resolve are reported as
/// `unbound-template-key` warnings.
pub fn validate_graph_with(adg: &Adg, keys: Option<&dyn TemplateKeyCheck>) -> ValidationReport {
    let mut out = Vec::new();

    if adg.schema != ADG_SCHEMA {
        out.push(Finding::error(
            "unsupported-schema",
            Subject::Graph,
            format!("schema {:?}, expected {ADG_SCHEMA:?}", adg.schema),
        ));
    }

    // first occurrence wins so one duplicated id yields one finding
    let mut nodes = BTreeMap::new();
    let mut reported_dups = BTreeSet::new();
    for node in &adg.nodes {
        if nodes.contains_key(node.id.as_str()) {
            if reported_dups.insert(node.id.as_str()) {
                out.push(Finding::error(
                    "duplicate-node-id",
                    Subject::Node(node.id.clone()),
                    "node id appears more than once",
                ));
            }
        } else {
            nodes.insert(node.id.as_str(), node);
        }
    }

    let mut labels = BTreeSet::new();
    for label in &adg.label_vocabulary {
        if !labels.insert(label.name.as_str()) {
            out.push(Finding::error(
                "duplicate-label",
                Subject::Label(label.name.clone()),
                "label defined more than once",
            ));
        }
        if label.template_key.trim().is_empty() {
            out.push(Finding::error(
                "empty-template-key",
                Subject::Label(label.name.clone()),
                "label has no template key",
            ));
        }
    }

    let prompt_len = char_len(&adg.prompt_text);
    for node in nodes.values() {
        let subject = || Subject::Node(node.id.clone());
        if node.kind.is_prompt_text() {
            if node.paragraph == 0 {
                out.push(Finding::error("invalid-paragraph", subject(), "prompt nodes use 1-based paragraphs"));
            }
            match node.span {
                None => out.push(Finding::error("missing-span", subject(), "prompt nodes must carry a span")),
                Some(span) if !span.fits(prompt_len) => out.push(Finding::error(
                    "span-out-of-range",
                    subject(),
                    format!("span {span} outside prompt text of {prompt_len} characters"),
                )),
                Some(span) => {
                    let actual = span.slice(&adg.prompt_text).unwrap_or_default();
                    if actual != node.text {
                        out.push(Finding::error(
                            "span-text-mismatch",
                            subject(),
                            format!("text {:?} differs from prompt text {actual:?} at {span}", node.text),
                        ));
                    } else if node.paragraph != 0 && node.paragraph != paragraph_at(&adg.prompt_text, span.start) {
                        out.push(Finding::warning(
                            "paragraph-mismatch",
                            subject(),
                            format!(
                                "paragraph {} but span starts in paragraph {}",
                                node.paragraph,
                                paragraph_at(&adg.prompt_text, span.start)
                            ),
                        ));
                    }
                }
            }
        }
        if let Some(parent) = &node.parent {
            match nodes.get(parent.as_str()) {
                Some(p) if node.kind == NodeKind::Chunk && p.kind == NodeKind::Sentence => {
                    if let (Some(c), Some(s)) = (node.span, p.span) {
                        if c.start < s.start || c.end > s.end {
                            out.push(Finding::warning(
                                "chunk-outside-parent",
                                subject(),
                                format!("chunk span {c} not inside parent span {s}"),
                            ));
                        }
                    }
                }
                _ => out.push(Finding::error(
                    "invalid-parent",
                    subject(),
                    format!("parent {parent:?} must be an existing sentence node of a chunk"),
                )),
            }
        }
        for anchor in &node.anchors {
            let valid =
                node.kind == NodeKind::AnswerCue && nodes.get(anchor.as_str()).is_some_and(|a| a.kind.is_prompt_text());
            if !valid {
                out.push(Finding::error(
                    "invalid-anchor",
                    subject(),
                    format!("anchor {anchor:?} must be a prompt node and only answer cues carry anchors"),
                ));
            }
        }
    }

    // chunks of one sentence must not overlap
    let mut by_parent: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for node in nodes.values() {
        if let (NodeKind::Chunk, Some(parent), Some(span)) = (node.kind, &node.parent, node.span) {
            by_parent.entry(parent.as_str()).or_default().push((span, node.id.as_str()));
        }
    }
    for chunks in by_parent.values_mut() {
        chunks.sort();
        for pair in chunks.windows(2) {
            let ((a, a_id), (b, b_id)) = (pair[0], pair[1]);
            if a.overlaps(&b) {
                out.push(Finding::error(
                    "chunk-overlap",
                    Subject::Node(b_id.to_string()),
                    format!("span {b} overlaps chunk {a_id} at {a}"),
                ));
            }
        }
    }

    let mut triples = BTreeSet::new();
    let mut used_labels = BTreeSet::new();
    for (i, edge) in adg.edges.iter().enumerate() {
        let missing: Vec<&str> =
            [edge.src.as_str(), edge.dst.as_str()].into_iter().filter(|id| !nodes.contains_key(id)).collect();
        if !missing.is_empty() {
            out.push(Finding::error(
                "dangling-edge",
                Subject::Edge(i),
                format!("edge references unknown node(s) {}", missing.join(", ")),
            ));
        }
        if edge.src == edge.dst {
            out.push(Finding::error("self-loop", Subject::Edge(i), format!("edge loops on {}", edge.src)));
        }
        if labels.contains(edge.label.as_str()) {
            used_labels.insert(edge.label.as_str());
        } else {
            out.push(Finding::error(
                "unbound-label",
                Subject::Edge(i),
                format!("label {:?} is not in the vocabulary", edge.label),
            ));
        }
        if !triples.insert((&edge.src, &edge.dst, &edge.label)) {
            out.push(Finding::error(
                "duplicate-edge",
                Subject::Edge(i),
                format!("({}, {}, {}) already present", edge.src, edge.dst, edge.label),
            ));
        }
    }

    if let Some(keys) = keys {
        for name in used_labels {
            let label = adg.label(name).expect("used labels are in the vocabulary");
            let unresolved: Vec<&str> = label.template_keys().filter(|k| !keys.has_template_key(k)).collect();
            if !unresolved.is_empty() {
                out.push(Finding::warning(
                    "unbound-template-key",
                    Subject::Label(name.to_string()),
                    format!("template key(s) {} not found in registry", unresolved.join(", ")),
                ));
            }
        }
    }

    for (criterion, node_id) in &adg.criteria_bindings {
        match nodes.get(node_id.as_str()) {
            None => out.push(Finding::error(
                "binding-unknown-node",
                Subject::Criterion(criterion.clone()),
                format!("bound to unknown node {node_id:?}"),
            )),
            Some(n) if n.kind != NodeKind::AnswerCue => out.push(Finding::error(
                "binding-not-answer-cue",
                Subject::Criterion(criterion.clone()),
                format!("bound to {} node {node_id:?}", n.kind.as_str()),
            )),
            Some(_) => {}
        }
    }

    // undirected reachability from the prompt-text nodes
    let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in &adg.edges {
        if nodes.contains_key(e.src.as_str()) && nodes.contains_key(e.dst.as_str()) {
            adjacency.entry(&e.src).or_default().push(&e.dst);
            adjacency.entry(&e.dst).or_default().push(&e.src);
        }
    }
    let mut reached: BTreeSet<&str> =
        nodes.values().filter(|n| n.kind.is_prompt_text()).map(|n| n.id.as_str()).collect();
    let mut queue: VecDeque<&str> = reached.iter().copied().collect();
    while let Some(cur) = queue.pop_front() {
        for &next in adjacency.get(cur).into_iter().flatten() {
            if reached.insert(next) {
                queue.push_back(next);
            }
        }
    }
    for node in nodes.values().filter(|n| n.kind == NodeKind::AnswerCue) {
        if !reached.contains(node.id.as_str()) {
            out.push(Finding::error(
                "unreachable-answer-node",
                Subject::Node(node.id.clone()),
                "no path from any sentence or chunk node",
            ));
        }
    }

    ValidationReport::from_findings(out)
}
