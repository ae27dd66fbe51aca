//! Answer diagnostic graph: prompt sentences, authored chunks and
//! model-answer cues joined by relation-labeled edges.

mod path;
mod validate;

pub use path::{relation_between, Orientation, PathStep, RelationPath};
pub use validate::{validate_graph, validate_graph_with, TemplateKeyCheck};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::span::Span;

pub const ADG_SCHEMA: &str = "adg/1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdgError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown field at line {line}, column {column}: {message}")]
    UnknownField { line: usize, column: usize, message: String },
    #[error("unsupported schema {found:?} (expected {ADG_SCHEMA:?})")]
    Schema { found: String },
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
}

impl AdgError {
    pub fn code(&self) -> &'static str {
        match self {
            AdgError::Syntax { .. } => "syntax",
            AdgError::UnknownField { .. } => "unknown-field",
            AdgError::Schema { .. } => "unsupported-schema",
            AdgError::DuplicateNode(_) => "duplicate-node-id",
            AdgError::UnknownNode(_) => "unknown-node",
        }
    }

    pub(crate) fn from_json(e: serde_json::Error) -> Self {
        let message = e.to_string();
        let (line, column) = (e.line(), e.column());
        if message.starts_with("unknown field") {
            AdgError::UnknownField { line, column, message }
        } else {
            AdgError::Syntax { line, column, message }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Sentence,
    Chunk,
    AnswerCue,
}

impl NodeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeKind::Sentence => "sentence",
            NodeKind::Chunk => "chunk",
            NodeKind::AnswerCue => "answer_cue",
        }
    }

    pub fn is_prompt_text(&self) -> bool {
        matches!(self, NodeKind::Sentence | NodeKind::Chunk)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdgNode {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default)]
    pub text: String,
    /// 1-based paragraph of the prompt text; 0 for model-answer cues.
    #[serde(default)]
    pub paragraph: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
    /// Sentence a chunk was cut from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    /// Prompt nodes a model-answer cue restates. A response aligned to one of
    /// these (or to a chunk of one) cites the right location.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anchors: Vec<String>,
}

fn default_directed() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdgEdge {
    /// Nucleus or claim side when `directed`.
    pub src: String,
    pub dst: String,
    pub label: String,
    #[serde(default = "default_directed", skip_serializing_if = "is_true")]
    pub directed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationLabel {
    pub name: String,
    pub template_key: String,
    /// Key used when a directed edge is walked from its nucleus side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse_template_key: Option<String>,
}

impl RelationLabel {
    pub fn new(name: &str, template_key: &str) -> Self {
        RelationLabel { name: name.into(), template_key: template_key.into(), inverse_template_key: None }
    }

    pub fn with_inverse(mut self, key: &str) -> Self {
        self.inverse_template_key = Some(key.into());
        self
    }

    /// The ten default relation labels and their wrong-part template keys.
    pub fn default_vocabulary() -> Vec<RelationLabel> {
        vec![
            RelationLabel::new("elaboration", "wrong_part.elaboration"),
            RelationLabel::new("cause", "wrong_part.cause").with_inverse("wrong_part.result"),
            RelationLabel::new("result", "wrong_part.result").with_inverse("wrong_part.cause"),
            RelationLabel::new("contrast", "wrong_part.contrast"),
            RelationLabel::new("concession", "wrong_part.contrast"),
            RelationLabel::new("example", "wrong_part.example"),
            RelationLabel::new("paraphrase", "wrong_part.paraphrase"),
            RelationLabel::new("summary", "wrong_part.paraphrase"),
            RelationLabel::new("background", "wrong_part.elaboration"),
            RelationLabel::new("condition", "wrong_part.cause"),
        ]
    }

    pub fn template_keys(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.template_key.as_str()).chain(self.inverse_template_key.as_deref())
    }
}

/// On-disk form. Node text and paragraph may be omitted for prompt nodes
/// and are then resolved from the span.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdgDocument {
    schema: String,
    id: String,
    prompt_id: String,
    prompt_text: String,
    label_vocabulary: Vec<RelationLabel>,
    nodes: Vec<NodeDocument>,
    #[serde(default)]
    edges: Vec<AdgEdge>,
    #[serde(default)]
    criteria_bindings: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDocument {
    id: String,
    kind: NodeKind,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    paragraph: Option<u32>,
    #[serde(default)]
    span: Option<Span>,
    #[serde(default)]
    hint: Option<String>,
    #[serde(default)]
    parent: Option<String>,
    #[serde(default)]
    anchors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Adg {
    pub schema: String,
    pub id: String,
    pub prompt_id: String,
    pub prompt_text: String,
    pub label_vocabulary: Vec<RelationLabel>,
    pub nodes: Vec<AdgNode>,
    pub edges: Vec<AdgEdge>,
    pub criteria_bindings: BTreeMap<String, String>,
}

impl From<AdgDocument> for Adg {
    fn from(doc: AdgDocument) -> Self {
        let nodes = doc
            .nodes
            .into_iter()
            .map(|n| {
                let resolved = n.span.and_then(|s| s.slice(&doc.prompt_text));
                let text = match (n.text, resolved) {
                    (Some(t), _) => t,
                    (None, Some(t)) => t.to_string(),
                    (None, None) => String::new(),
                };
                let paragraph = match (n.paragraph, n.span) {
                    (Some(p), _) => p,
                    (None, Some(s)) if n.kind.is_prompt_text() => paragraph_at(&doc.prompt_text, s.start),
                    _ => 0,
                };
                AdgNode {
                    id: n.id,
                    kind: n.kind,
                    text,
                    paragraph,
                    span: n.span,
                    hint: n.hint,
                    parent: n.parent,
                    anchors: n.anchors,
                }
            })
            .collect();
        Adg {
            schema: doc.schema,
            id: doc.id,
            prompt_id: doc.prompt_id,
            prompt_text: doc.prompt_text,
            label_vocabulary: doc.label_vocabulary,
            nodes,
            edges: doc.edges,
            criteria_bindings: doc.criteria_bindings,
        }
    }
}

impl<'de> Deserialize<'de> for Adg {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        AdgDocument::deserialize(d).map(Adg::from)
    }
}

/// Parses a graph document without checking references between its parts.
/// Use this when the caller wants every defect reported by [`validate_graph`].
pub fn parse_adg(document: &str) -> Result<Adg, AdgError> {
    let adg: Adg = serde_json::from_str(document).map_err(AdgError::from_json)?;
    if adg.schema != ADG_SCHEMA {
        return Err(AdgError::Schema { found: adg.schema });
    }
    Ok(adg)
}

/// Parses a graph document and resolves its node references.
///
/// Semantic invariants (reachability, spans, labels) are left to
/// [`validate_graph`].
pub fn load_adg(document: &str) -> Result<Adg, AdgError> {
    let adg = parse_adg(document)?;
    let mut ids = BTreeSet::new();
    for node in &adg.nodes {
        if !ids.insert(node.id.as_str()) {
            return Err(AdgError::DuplicateNode(node.id.clone()));
        }
    }
    let resolve = |id: &String| {
        if ids.contains(id.as_str()) {
            Ok(())
        } else {
            Err(AdgError::UnknownNode(id.clone()))
        }
    };
    for edge in &adg.edges {
        resolve(&edge.src)?;
        resolve(&edge.dst)?;
    }
    for node in &adg.nodes {
        node.parent.iter().chain(&node.anchors).try_for_each(resolve)?;
    }
    adg.criteria_bindings.values().try_for_each(resolve)?;
    Ok(adg)
}

impl Adg {
    /// Canonical pretty-printed JSON encoding.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn node(&self, id: &str) -> Option<&AdgNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn label(&self, name: &str) -> Option<&RelationLabel> {
        self.label_vocabulary.iter().find(|l| l.name == name)
    }

    /// Model-answer node bound to a criterion.
    pub fn bound_node(&self, criterion_id: &str) -> Option<&AdgNode> {
        self.criteria_bindings.get(criterion_id).and_then(|id| self.node(id))
    }

    /// Whether `node_id` is the criterion's model-answer node, one of its
    /// anchors, or a chunk cut from one of those.
    pub fn is_on_target(&self, node_id: &str, criterion_id: &str) -> bool {
        let Some(bound) = self.bound_node(criterion_id) else {
            return false;
        };
        let targets = |id: &str| id == bound.id || bound.anchors.iter().any(|a| a == id);
        if targets(node_id) {
            return true;
        }
        self.node(node_id).and_then(|n| n.parent.as_deref()).is_some_and(targets)
    }

    /// 1-based paragraph containing the character at `offset` of the prompt text.
    pub fn paragraph_at(&self, offset: usize) -> u32 {
        paragraph_at(&self.prompt_text, offset)
    }
}

/// Paragraph index of a prompt-text offset: one plus the number of line-break
/// runs before it, ignoring breaks at the very start of the text.
pub fn paragraph_at(text: &str, offset: usize) -> u32 {
    let mut paragraph = 1;
    let mut seen_text = false;
    let mut in_break = false;
    for ch in text.chars().take(offset) {
        if ch == '\n' || ch == '\r' {
            if seen_text && !in_break {
                paragraph += 1;
            }
            in_break = true;
        } else {
            seen_text = true;
            in_break = false;
        }
    }
    paragraph
}

pub fn node_paragraph(adg: &Adg, node_id: &str) -> Result<u32, AdgError> {
    let node = adg.node(node_id).ok_or_else(|| AdgError::UnknownNode(node_id.to_string()))?;
    Ok(match node.kind {
        NodeKind::AnswerCue => 0,
        _ => node.paragraph,
    })
}
