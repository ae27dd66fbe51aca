use serde::{Deserialize, Serialize};

use super::{FeedbackError, TemplateRegistry};
use crate::alignment::AlignmentResult;
use crate::graph::{Orientation, RelationLabel, RelationPath};

pub const FULL_CREDIT: &str = "full_credit";
pub const INSUFFICIENT_ELEMENTS: &str = "insufficient_elements";
pub const NO_REFERENCE: &str = "no_reference";
pub const OFF_STRUCTURE: &str = "off_structure";

/// Everything the decision table looks at for one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionContext {
    pub criterion_id: String,
    pub score: u32,
    pub max_score: u32,
    pub has_cue: bool,
    pub alignment: Option<AlignmentResult>,
    /// Path from the response node to the criterion's model-answer node.
    pub relation: Option<RelationPath>,
    /// Response node is the model-answer node, one of its anchors, or a chunk of one.
    pub on_target: bool,
    pub error_signature: Option<String>,
}

/// Rows of the selection table, in priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRow {
    Analytic,
    FullCredit,
    NoReference,
    InsufficientElements,
    WrongPart,
    OffStructure,
}

impl DecisionRow {
    pub const ALL: [DecisionRow; 6] = [
        DecisionRow::Analytic,
        DecisionRow::FullCredit,
        DecisionRow::NoReference,
        DecisionRow::InsufficientElements,
        DecisionRow::WrongPart,
        DecisionRow::OffStructure,
    ];
}

impl SelectionContext {
    fn aligned(&self) -> bool {
        self.has_cue && self.alignment.as_ref().is_some_and(|a| a.aligned)
    }

    fn first_step(&self) -> Option<&crate::graph::PathStep> {
        self.relation.as_ref().and_then(|p| p.first())
    }

    /// Whether a row's own condition holds, ignoring row priority.
    pub fn row_matches(&self, row: DecisionRow, registry: &TemplateRegistry, language: &str) -> bool {
        match row {
            // an error type on a full-score answer is stale annotation
            DecisionRow::Analytic => {
                self.score < self.max_score
                    && self
                        .error_signature
                        .as_deref()
                        .is_some_and(|sig| registry.analytic(&self.criterion_id, sig, language).is_some())
            }
            DecisionRow::FullCredit => self.score >= self.max_score,
            DecisionRow::NoReference => !self.aligned(),
            DecisionRow::InsufficientElements => {
                self.aligned() && self.score < self.max_score && (self.on_target || self.relation_is_self())
            }
            DecisionRow::WrongPart => self.aligned() && !self.on_target && self.first_step().is_some(),
            DecisionRow::OffStructure => self.aligned() && !self.on_target && self.first_step().is_none(),
        }
    }

    fn relation_is_self(&self) -> bool {
        self.relation.as_ref().is_some_and(RelationPath::is_empty)
    }

    pub fn matching_rows(&self, registry: &TemplateRegistry, language: &str) -> Vec<DecisionRow> {
        DecisionRow::ALL.into_iter().filter(|r| self.row_matches(*r, registry, language)).collect()
    }
}

/// Key for a wrong-part step: walking a directed edge from its nucleus side
/// uses the label's inverse key when it has one.
pub fn wrong_part_key(labels: &[RelationLabel], path: &RelationPath) -> Result<String, FeedbackError> {
    let step = path.first().expect("wrong-part row requires a path");
    let label =
        labels.iter().find(|l| l.name == step.label).ok_or_else(|| FeedbackError::UnknownLabel(step.label.clone()))?;
    Ok(match (step.orientation, &label.inverse_template_key) {
        (Orientation::Forward, Some(inverse)) => inverse.clone(),
        _ => label.template_key.clone(),
    })
}

/// The first matching row and the template key it selects.
pub fn decide(
    registry: &TemplateRegistry,
    labels: &[RelationLabel],
    ctx: &SelectionContext,
    language: &str,
) -> Result<(DecisionRow, String), FeedbackError> {
    let row = DecisionRow::ALL
        .into_iter()
        .find(|r| ctx.row_matches(*r, registry, language))
        .expect("off_structure and no_reference cover every remaining context");
    let key = match row {
        DecisionRow::Analytic => {
            let sig = ctx.error_signature.as_deref().expect("analytic row has a signature");
            registry.analytic(&ctx.criterion_id, sig, language).expect("row matched").key.clone()
        }
        DecisionRow::FullCredit => FULL_CREDIT.to_string(),
        DecisionRow::NoReference => NO_REFERENCE.to_string(),
        DecisionRow::InsufficientElements => INSUFFICIENT_ELEMENTS.to_string(),
        DecisionRow::WrongPart => wrong_part_key(labels, ctx.relation.as_ref().expect("row matched"))?,
        DecisionRow::OffStructure => OFF_STRUCTURE.to_string(),
    };
    if registry.get(&key, language).is_none() {
        return Err(FeedbackError::UnboundTemplate { key, language: language.to_string() });
    }
    Ok((row, key))
}

/// Template key chosen for a selection context.
pub fn select_template(
    registry: &TemplateRegistry,
    labels: &[RelationLabel],
    ctx: &SelectionContext,
    language: &str,
) -> Result<String, FeedbackError> {
    decide(registry, labels, ctx, language).map(|(_, key)| key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::ProviderKind;
    use crate::graph::PathStep;

    fn alignment(aligned: bool) -> AlignmentResult {
        AlignmentResult {
            response_id: "r".into(),
            criterion_id: "B".into(),
            node_id: "x".into(),
            similarity: if aligned { 0.8 } else { 0.05 },
            runner_up_node_id: None,
            margin: 0.1,
            provider_kind: ProviderKind::CharNgram,
            threshold: 0.15,
            aligned,
        }
    }

    fn path(label: &str, orientation: Orientation) -> RelationPath {
        RelationPath {
            steps: vec![PathStep { edge_index: 0, from: "x".into(), to: "a".into(), label: label.into(), orientation }],
        }
    }

    fn ctx(score: u32, aligned: bool, relation: Option<RelationPath>, on_target: bool) -> SelectionContext {
        SelectionContext {
            criterion_id: "B".into(),
            score,
            max_score: 2,
            has_cue: true,
            alignment: Some(alignment(aligned)),
            relation,
            on_target,
            error_signature: None,
        }
    }

    fn select(c: &SelectionContext) -> String {
        select_template(&TemplateRegistry::builtin(), &RelationLabel::default_vocabulary(), c, "en").unwrap()
    }

    #[test]
    fn walkthrough_partial_on_target() {
        let c = ctx(1, true, Some(path("elaboration", Orientation::Backward)), true);
        assert_eq!(select(&c), INSUFFICIENT_ELEMENTS);
    }

    #[test]
    fn full_score_wins_regardless_of_alignment() {
        assert_eq!(select(&ctx(2, false, None, false)), FULL_CREDIT);
        let mut c = ctx(2, true, Some(path("contrast", Orientation::Forward)), false);
        c.has_cue = false;
        assert_eq!(select(&c), FULL_CREDIT);
    }

    #[test]
    fn contrast_edge_with_zero_score() {
        let c = ctx(0, true, Some(path("contrast", Orientation::Backward)), false);
        assert_eq!(select(&c), "wrong_part.contrast");
    }

    #[test]
    fn cause_orientation() {
        // response node is the cause (satellite) of the next node
        assert_eq!(select(&ctx(0, true, Some(path("cause", Orientation::Backward)), false)), "wrong_part.cause");
        // response node is the claim whose cause leads on to the answer
        assert_eq!(select(&ctx(0, true, Some(path("cause", Orientation::Forward)), false)), "wrong_part.result");
        assert_eq!(select(&ctx(0, true, Some(path("cause", Orientation::Undirected)), false)), "wrong_part.cause");
    }

    #[test]
    fn no_cue_and_unaligned() {
        let mut c = ctx(1, true, None, false);
        c.has_cue = false;
        c.alignment = None;
        assert_eq!(select(&c), NO_REFERENCE);
        assert_eq!(select(&ctx(0, false, Some(path("cause", Orientation::Forward)), true)), NO_REFERENCE);
    }

    #[test]
    fn analytic_template_takes_priority() {
        let registry = TemplateRegistry::builtin().with_template(super::super::FeedbackTemplate {
            key: "B.symbol_only".into(),
            scope: super::super::TemplateScope::Analytic,
            criterion_id: Some("B".into()),
            error_signature: Some("symbol_only".into()),
            language: "en".into(),
            body: "What kind of symbol?".into(),
            required_slots: Default::default(),
        });
        let mut c = ctx(1, true, Some(path("elaboration", Orientation::Backward)), true);
        c.error_signature = Some("symbol_only".into());
        let labels = RelationLabel::default_vocabulary();
        assert_eq!(select_template(&registry, &labels, &c, "en").unwrap(), "B.symbol_only");
        // no Japanese analytic template: falls through to the generic table
        assert_eq!(select_template(&registry, &labels, &c, "ja").unwrap(), INSUFFICIENT_ELEMENTS);
        c.error_signature = Some("other".into());
        assert_eq!(select_template(&registry, &labels, &c, "en").unwrap(), INSUFFICIENT_ELEMENTS);
    }

    #[test]
    fn missing_key_is_unbound_template() {
        let registry = TemplateRegistry::builtin().without_key("wrong_part.contrast");
        let c = ctx(0, true, Some(path("contrast", Orientation::Backward)), false);
        let err = select_template(&registry, &RelationLabel::default_vocabulary(), &c, "en").unwrap_err();
        assert_eq!(err.code(), "unbound-template");
    }
}
