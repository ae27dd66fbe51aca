//! Answer diagnostic graphs for short-answer reading comprehension feedback.
//!
//! A graph ([`graph::Adg`]) captures the logical structure of a prompt text:
//! its sentences and authored chunks, the model-answer cues for each analytic
//! criterion, and labeled relations between them. A scored student response
//! is aligned to a node of that graph through its justification cue
//! ([`alignment`]), and the relation between that node and the criterion's
//! model-answer node selects a feedback template ([`feedback`]).
//!
//! [`evalstats`] holds the hypothesis tests used to analyze classroom
//! questionnaires and the alignment accuracy harness.

pub mod alignment;
pub mod corpus;
pub mod evalstats;
pub mod feedback;
pub mod graph;
pub mod report;
pub mod span;

pub use alignment::{align_cue, AlignConfig, AlignError, AlignmentResult, SimilarityProvider};
pub use corpus::{load_corpus, Corpus, Criterion, PromptSpec, ScoredResponse};
pub use feedback::{generate_feedback, FeedbackReport, TemplateRegistry};
pub use graph::{load_adg, validate_graph, Adg, AdgEdge, AdgNode, NodeKind};
pub use report::{Finding, Severity, Subject, ValidationReport};
pub use span::Span;
