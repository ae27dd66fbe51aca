//! Template registry, the selection table, slot rendering and per-response
//! feedback reports.

mod generate;
mod select;
mod template;

pub use generate::{generate_batch, generate_feedback, FeedbackConfig, FeedbackItem, FeedbackReport};
pub use select::{
    decide, select_template, wrong_part_key, DecisionRow, SelectionContext, FULL_CREDIT, INSUFFICIENT_ELEMENTS,
    NO_REFERENCE, OFF_STRUCTURE,
};
pub use template::{render, FeedbackTemplate, SlotName, SlotValues, TemplateRegistry, TemplateScope, TEMPLATES_SCHEMA};

use std::collections::BTreeSet;
use thiserror::Error;

use crate::alignment::AlignError;
use crate::corpus::{CorpusError, PromptSpec};
use crate::graph::{Adg, AdgError};
use crate::report::{Finding, Subject, ValidationReport};

/// The ten generic template keys every registry must provide.
pub const GENERIC_KEYS: [&str; 10] = [
    "full_credit",
    "insufficient_elements",
    "no_reference",
    "off_structure",
    "wrong_part.elaboration",
    "wrong_part.cause",
    "wrong_part.result",
    "wrong_part.contrast",
    "wrong_part.example",
    "wrong_part.paraphrase",
];

/// Optional report-level messages; a plain score line is used without them.
pub const OVERALL_FULL: &str = "overall.full_marks";
pub const OVERALL_PARTIAL: &str = "overall.partial";

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unsupported schema {found:?} (expected {TEMPLATES_SCHEMA:?})")]
    Schema { found: String },
    #[error("template {key}: unknown placeholder ({placeholder})")]
    UnknownPlaceholder { key: String, placeholder: String },
    #[error("template {key}: {reason}")]
    InvalidTemplate { key: String, reason: String },
    #[error("template {key} defined twice for language {language}")]
    DuplicateTemplate { key: String, language: String },
    #[error("no template {key:?} for language {language:?}")]
    UnboundTemplate { key: String, language: String },
    #[error("relation label {0:?} is not in the graph vocabulary")]
    UnknownLabel(String),
    #[error("missing slot {0}")]
    MissingSlot(SlotName),
    #[error("template {0} rendered to empty text")]
    EmptyRender(String),
    #[error("criterion {0} has no model-answer node in the graph")]
    UnboundCriterion(String),
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Graph(#[from] AdgError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl FeedbackError {
    pub fn code(&self) -> &'static str {
        match self {
            FeedbackError::Syntax { .. } => "syntax",
            FeedbackError::Schema { .. } => "unsupported-schema",
            FeedbackError::UnknownPlaceholder { .. } => "unknown-placeholder",
            FeedbackError::InvalidTemplate { .. } => "invalid-template",
            FeedbackError::DuplicateTemplate { .. } => "duplicate-template",
            FeedbackError::UnboundTemplate { .. } => "unbound-template",
            FeedbackError::UnknownLabel(_) => "unbound-label",
            FeedbackError::MissingSlot(_) => "missing-slot",
            FeedbackError::EmptyRender(_) => "empty-render",
            FeedbackError::UnboundCriterion(_) => "unbound-criterion",
            FeedbackError::Mismatch(_) => "mismatch",
            FeedbackError::Align(e) => e.code(),
            FeedbackError::Graph(e) => e.code(),
            FeedbackError::Corpus(e) => e.code(),
        }
    }
}

/// Checks a registry against a graph and the prompts it will serve.
///
/// Each missing key is reported once, under the most specific code: a
/// missing generic key is `missing-generic-template` even when graph labels
/// also point at it.
pub fn validate_registry(registry: &TemplateRegistry, adg: &Adg, prompts: &[PromptSpec]) -> ValidationReport {
    let mut out = Vec::new();
    let languages = registry.languages();
    if languages.is_empty() {
        out.push(Finding::error("empty-registry", Subject::Graph, "registry has no templates"));
    }
    let missing_in = |key: &str| -> Vec<&str> {
        languages.iter().copied().filter(|lang| registry.get(key, lang).is_none()).collect()
    };

    for key in GENERIC_KEYS {
        let missing = missing_in(key);
        if !missing.is_empty() {
            out.push(Finding::error(
                "missing-generic-template",
                Subject::Template(key.to_string()),
                format!("no template for language(s) {}", missing.join(", ")),
            ));
        }
    }

    let label_keys: BTreeSet<&str> = adg.label_vocabulary.iter().flat_map(|l| l.template_keys()).collect();
    for key in label_keys {
        if GENERIC_KEYS.contains(&key) {
            continue;
        }
        let missing = missing_in(key);
        if !missing.is_empty() {
            out.push(Finding::error(
                "unresolved-template-key",
                Subject::Template(key.to_string()),
                format!("relation label key has no template for language(s) {}", missing.join(", ")),
            ));
        }
    }

    let mut seen = BTreeSet::new();
    for t in registry.templates() {
        let subject = || Subject::Template(t.key.clone());
        if !seen.insert((t.key.as_str(), t.language.as_str())) {
            out.push(Finding::error("duplicate-template", subject(), format!("defined twice for {}", t.language)));
        }
        for problem in t.placeholder_problems() {
            out.push(Finding::error("unknown-placeholder", subject(), format!("{} ({})", problem, t.language)));
        }
        if let Some(problem) = t.scope_problem() {
            out.push(Finding::error("invalid-template", subject(), problem));
        }
        if let Ok(names) = t.placeholders() {
            for slot in &t.required_slots {
                if !names.contains(&slot.as_str()) {
                    out.push(Finding::warning(
                        "unused-slot",
                        subject(),
                        format!("required slot {slot} never appears in the body ({})", t.language),
                    ));
                }
            }
        }
        if t.scope == TemplateScope::Analytic {
            if let Some(cid) = &t.criterion_id {
                let known = prompts.iter().filter(|p| p.id == adg.prompt_id).any(|p| p.criterion(cid).is_some());
                if !known {
                    out.push(Finding::error(
                        "unknown-criterion",
                        subject(),
                        format!("criterion {cid:?} is not in prompt {}", adg.prompt_id),
                    ));
                }
            }
            if t.error_signature.is_none() {
                out.push(Finding::warning("missing-error-signature", subject(), "analytic template is never selected"));
            }
        }
    }

    let needs_hint = registry.templates().iter().any(|t| t.required_slots.contains(&SlotName::AnswerHint));
    for prompt in prompts.iter().filter(|p| p.id == adg.prompt_id) {
        for c in &prompt.criteria {
            match adg.bound_node(&c.id) {
                None => out.push(Finding::error(
                    "unbound-criterion",
                    Subject::Criterion(c.id.clone()),
                    "criterion has no model-answer node in the graph",
                )),
                Some(node) if needs_hint && node.hint.is_none() => out.push(Finding::warning(
                    "missing-answer-hint",
                    Subject::Node(node.id.clone()),
                    "templates use answer_hint but this model-answer node has none",
                )),
                Some(_) => {}
            }
        }
    }
    if !prompts.iter().any(|p| p.id == adg.prompt_id) {
        out.push(Finding::warning(
            "unknown-prompt",
            Subject::Prompt(adg.prompt_id.clone()),
            "graph prompt not among the supplied prompts",
        ));
    }

    ValidationReport::from_findings(out)
}
