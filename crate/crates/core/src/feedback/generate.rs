use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::select::{decide, DecisionRow, SelectionContext};
use super::template::{render, SlotName, SlotValues, TemplateRegistry};
use super::{FeedbackError, OVERALL_FULL, OVERALL_PARTIAL};
use crate::alignment::{align_cue, AlignConfig, AlignmentResult, SimilarityProvider};
use crate::corpus::{cue_text, PromptSpec, ScoredResponse};
use crate::graph::{node_paragraph, relation_between, Adg, RelationPath};
use crate::span::Span;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    #[serde(default)]
    pub align: AlignConfig,
    #[serde(default = "default_language")]
    pub language: String,
}

fn default_language() -> String {
    "en".into()
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig { align: AlignConfig::default(), language: default_language() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackItem {
    pub criterion_id: String,
    pub score: u32,
    pub max_score: u32,
    pub decision: DecisionRow,
    pub template_key: String,
    pub rendered_text: String,
    /// Every slot value computed for this criterion, used or not.
    pub slots: SlotValues,
    /// Slots the chosen template actually consumed.
    pub slots_used: Vec<SlotName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cue_span: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<AlignmentResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<RelationPath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub response_id: String,
    pub prompt_id: String,
    pub language: String,
    pub items: Vec<FeedbackItem>,
    pub total_score: u32,
    pub max_total: u32,
    pub overall_message: String,
}

impl FeedbackReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text layout: one block per criterion, then the overall line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            let _ = writeln!(out, "[{}] {}/{}", item.criterion_id, item.score, item.max_score);
            let _ = writeln!(out, "{}", item.rendered_text);
            out.push('\n');
        }
        let _ = writeln!(out, "Total {}/{}", self.total_score, self.max_total);
        let _ = writeln!(out, "{}", self.overall_message);
        out
    }
}

/// Builds the feedback report for one scored response. Any failing criterion
/// fails the whole report.
pub fn generate_feedback(
    adg: &Adg,
    registry: &TemplateRegistry,
    prompt: &PromptSpec,
    response: &ScoredResponse,
    provider: &dyn SimilarityProvider,
    config: &FeedbackConfig,
) -> Result<FeedbackReport, FeedbackError> {
    if response.prompt_id != prompt.id {
        return Err(FeedbackError::Mismatch(format!(
            "response {} answers prompt {}, not {}",
            response.response_id, response.prompt_id, prompt.id
        )));
    }
    if adg.prompt_id != prompt.id {
        return Err(FeedbackError::Mismatch(format!(
            "graph {} belongs to prompt {}, not {}",
            adg.id, adg.prompt_id, prompt.id
        )));
    }
    response.check_against(prompt)?;
    config.align.check()?;

    let language = config.language.as_str();
    let mut items = Vec::with_capacity(prompt.criteria.len());
    for criterion in &prompt.criteria {
        let bound =
            adg.bound_node(&criterion.id).ok_or_else(|| FeedbackError::UnboundCriterion(criterion.id.clone()))?;
        let entry = response.per_criterion.get(&criterion.id);
        let score = entry.map_or(0, |e| e.score);
        let cue = match entry {
            Some(_) => cue_text(response, &criterion.id)?,
            None => None,
        };

        let alignment = match &cue {
            Some(cue) => {
                Some(align_cue(adg, cue, provider, &config.align)?.with_subject(&response.response_id, &criterion.id))
            }
            None => None,
        };
        let matched = alignment.as_ref().filter(|a| a.aligned);
        let (relation, on_target) = match matched {
            Some(a) => (relation_between(adg, &a.node_id, &bound.id)?, adg.is_on_target(&a.node_id, &criterion.id)),
            None => (None, false),
        };

        let ctx = SelectionContext {
            criterion_id: criterion.id.clone(),
            score,
            max_score: criterion.max_score,
            has_cue: cue.is_some(),
            alignment: alignment.clone(),
            relation: relation.clone(),
            on_target,
            error_signature: entry.and_then(|e| e.error_signature.clone()),
        };
        let (decision, key) = decide(registry, &adg.label_vocabulary, &ctx, language)?;

        // slot inputs never depend on the score except score_fraction
        let mut slots = SlotValues::new();
        slots.insert(SlotName::ScoreFraction, format!("{}/{}", score, criterion.max_score));
        slots.insert(SlotName::CriterionExcerpt, criterion.excerpt().to_string());
        if let Some(cue) = &cue {
            slots.insert(SlotName::JustificationCue, cue.clone());
        }
        let response_node = matched.and_then(|a| adg.node(&a.node_id));
        if let Some(node) = response_node {
            slots.insert(SlotName::ParagraphNumber, node_paragraph(adg, &node.id)?.to_string());
            slots.insert(SlotName::NodeExcerpt, node.text.clone());
        }
        if let Some(hint) = response_node.and_then(|n| n.hint.clone()).or_else(|| bound.hint.clone()) {
            slots.insert(SlotName::AnswerHint, hint);
        }
        if let Some(step) = relation.as_ref().and_then(|p| p.first()) {
            slots.insert(SlotName::RelationName, step.label.clone());
        }

        let template = registry
            .get(&key, language)
            .ok_or_else(|| FeedbackError::UnboundTemplate { key: key.clone(), language: language.to_string() })?;
        let rendered_text = render(template, &slots)?;
        items.push(FeedbackItem {
            criterion_id: criterion.id.clone(),
            score,
            max_score: criterion.max_score,
            decision,
            template_key: key,
            rendered_text,
            slots,
            slots_used: template.required_slots.iter().copied().collect(),
            cue_span: entry.and_then(|e| e.cue_span).filter(|s| !s.is_empty()),
            alignment,
            relation,
        });
    }

    let total_score = items.iter().map(|i| i.score).sum();
    let max_total = items.iter().map(|i| i.max_score).sum();
    let overall_message = overall_message(registry, language, total_score, max_total)?;
    Ok(FeedbackReport {
        response_id: response.response_id.clone(),
        prompt_id: prompt.id.clone(),
        language: language.to_string(),
        items,
        total_score,
        max_total,
        overall_message,
    })
}

fn overall_message(registry: &TemplateRegistry, language: &str, total: u32, max: u32) -> Result<String, FeedbackError> {
    let full = total >= max;
    let key = if full { OVERALL_FULL } else { OVERALL_PARTIAL };
    match registry.get(key, language) {
        Some(t) => {
            let slots = SlotValues::from([(SlotName::ScoreFraction, format!("{total}/{max}"))]);
            render(t, &slots)
        }
        None if full => Ok(format!("Full marks ({total}/{max}). Well done!")),
        None => Ok(format!("Score {total}/{max}. Review the feedback for each criterion and try again.")),
    }
}

/// Reports for many responses, computed on worker threads. The output order
/// and every report match calling [`generate_feedback`] once per response.
pub fn generate_batch<'a>(
    adg: &Adg,
    registry: &TemplateRegistry,
    prompt: &PromptSpec,
    responses: impl IntoIterator<Item = &'a ScoredResponse>,
    provider: &dyn SimilarityProvider,
    config: &FeedbackConfig,
) -> Result<Vec<FeedbackReport>, FeedbackError> {
    let responses: Vec<&ScoredResponse> = responses.into_iter().collect();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(responses.len().max(1));
    let chunk = responses.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = responses
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|r| generate_feedback(adg, registry, prompt, r, provider, config))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(responses.len());
        for h in handles {
            out.extend(h.join().expect("feedback worker panicked")?);
        }
        Ok(out)
    })
}
