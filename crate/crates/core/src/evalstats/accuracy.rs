use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::alignment::{align_cue, AlignConfig, AlignError, SimilarityProvider};
use crate::corpus::{cue_text, Corpus, CorpusError};
use crate::graph::Adg;

#[derive(Debug, Error)]
pub enum AccuracyError {
    #[error("no graph for prompt {0}")]
    MissingGraph(String),
    #[error("oracle node {node} for {response}/{criterion} is not in the graph")]
    UnknownOracleNode { response: String, criterion: String, node: String },
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl AccuracyError {
    pub fn code(&self) -> &'static str {
        match self {
            AccuracyError::MissingGraph(_) => "unknown-prompt",
            AccuracyError::UnknownOracleNode { .. } => "unknown-oracle",
            AccuracyError::Align(e) => e.code(),
            AccuracyError::Corpus(e) => e.code(),
        }
    }
}

/// How often predicted response nodes match the gold ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub evaluated: usize,
    /// Pairs without an oracle node or without a cue to align.
    pub skipped: usize,
    pub correct: usize,
    /// Absent when nothing was evaluated.
    pub top1: Option<f64>,
    pub mean_margin: Option<f64>,
    /// Counts keyed by `"<oracle kind>-><predicted kind>"`.
    pub confusion: BTreeMap<String, usize>,
}

/// Aligns every cue in the corpus and compares against its oracle node.
pub fn alignment_accuracy(
    corpus: &Corpus,
    graphs: &[Adg],
    provider: &dyn SimilarityProvider,
    config: &AlignConfig,
) -> Result<AccuracyReport, AccuracyError> {
    let mut report = AccuracyReport {
        evaluated: 0,
        skipped: 0,
        correct: 0,
        top1: None,
        mean_margin: None,
        confusion: BTreeMap::new(),
    };
    let mut margin_sum = 0.0;
    for response in &corpus.responses {
        for criterion in response.per_criterion.keys() {
            let Some(oracle) = corpus.oracle_node(&response.response_id, criterion) else {
                report.skipped += 1;
                continue;
            };
            let Some(cue) = cue_text(response, criterion)? else {
                report.skipped += 1;
                continue;
            };
            let adg = graphs
                .iter()
                .find(|g| g.prompt_id == response.prompt_id)
                .ok_or_else(|| AccuracyError::MissingGraph(response.prompt_id.clone()))?;
            let gold = adg.node(oracle).ok_or_else(|| AccuracyError::UnknownOracleNode {
                response: response.response_id.clone(),
                criterion: criterion.clone(),
                node: oracle.to_string(),
            })?;
            let result = align_cue(adg, &cue, provider, config)?;
            let predicted = adg.node(&result.node_id).expect("alignment picks a graph node");
            report.evaluated += 1;
            if result.node_id == gold.id {
                report.correct += 1;
            }
            margin_sum += result.margin;
            *report.confusion.entry(format!("{}->{}", gold.kind.as_str(), predicted.kind.as_str())).or_default() += 1;
        }
    }
    if report.evaluated > 0 {
        let n = report.evaluated as f64;
        report.top1 = Some(report.correct as f64 / n);
        report.mean_margin = Some(margin_sum / n);
    }
    Ok(report)
}
