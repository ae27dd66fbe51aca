//! Response-node estimation: score a justification cue against every
//! eligible graph node and take the best match.

pub mod embedding;
pub mod ngram;
pub mod tfidf;

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;
use thiserror::Error;

use crate::graph::{Adg, NodeKind};
use embedding::{EmbeddingCache, EmbeddingError, HttpTransport, RemoteEmbedder};
pub use ngram::{cosine, ngram_profile, normalize, SparseVector};
use tfidf::{TfidfModel, TokenRules};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("justification cue is empty")]
    EmptyCue,
    #[error("graph has no candidate nodes of the eligible kinds")]
    NoCandidates,
    #[error("similarity provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("invalid alignment config: {0}")]
    InvalidConfig(String),
}

impl AlignError {
    pub fn code(&self) -> &'static str {
        match self {
            AlignError::EmptyCue => "empty-cue",
            AlignError::NoCandidates => "no-candidates",
            AlignError::ProviderUnavailable(_) => "provider-unavailable",
            AlignError::InvalidConfig(_) => "invalid-config",
        }
    }
}

impl From<EmbeddingError> for AlignError {
    fn from(e: EmbeddingError) -> Self {
        AlignError::ProviderUnavailable(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    CharNgram,
    TokenTfidf,
    RemoteEmbedding,
}

/// Similarity scores from whichever provider produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub provider: ProviderKind,
    pub values: Vec<f64>,
}

/// Scores a cue against candidate texts. Values lie in `[0, 1]` and are
/// deterministic for fixed inputs.
pub trait SimilarityProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;
    fn similarities(&self, cue: &str, candidates: &[&str]) -> Result<Scores, AlignError>;
}

/// Character n-gram cosine; the default provider.
#[derive(Debug, Clone, Copy)]
pub struct CharNgram {
    pub n: usize,
}

impl Default for CharNgram {
    fn default() -> Self {
        CharNgram { n: 3 }
    }
}

impl SimilarityProvider for CharNgram {
    fn kind(&self) -> ProviderKind {
        ProviderKind::CharNgram
    }

    fn similarities(&self, cue: &str, candidates: &[&str]) -> Result<Scores, AlignError> {
        let q = ngram_profile(cue, self.n);
        let values = candidates.iter().map(|c| cosine(&q, &ngram_profile(c, self.n))).collect();
        Ok(Scores { provider: self.kind(), values })
    }
}

/// Token TF-IDF cosine with document frequencies from a fitted corpus.
#[derive(Debug, Clone)]
pub struct TokenTfidf {
    model: TfidfModel,
}

impl TokenTfidf {
    pub fn fit<'a>(documents: impl IntoIterator<Item = &'a str>, rules: TokenRules) -> Self {
        TokenTfidf { model: TfidfModel::fit(documents, rules) }
    }
}

impl SimilarityProvider for TokenTfidf {
    fn kind(&self) -> ProviderKind {
        ProviderKind::TokenTfidf
    }

    fn similarities(&self, cue: &str, candidates: &[&str]) -> Result<Scores, AlignError> {
        let q = self.model.vector(cue);
        let values = candidates.iter().map(|c| cosine(&q, &self.model.vector(c))).collect();
        Ok(Scores { provider: self.kind(), values })
    }
}

/// Cosine between remote sentence embeddings, negatives clamped to 0.
pub struct RemoteEmbedding {
    embedder: RemoteEmbedder,
}

impl RemoteEmbedding {
    pub fn new(embedder: RemoteEmbedder) -> Self {
        RemoteEmbedding { embedder }
    }

    pub fn embedder(&self) -> &RemoteEmbedder {
        &self.embedder
    }
}

impl SimilarityProvider for RemoteEmbedding {
    fn kind(&self) -> ProviderKind {
        ProviderKind::RemoteEmbedding
    }

    fn similarities(&self, cue: &str, candidates: &[&str]) -> Result<Scores, AlignError> {
        let mut texts = Vec::with_capacity(candidates.len() + 1);
        texts.push(cue);
        texts.extend_from_slice(candidates);
        let vectors = self.embedder.embed(&texts)?;
        let (q, rest) = vectors.split_first().expect("cue embedded");
        let values =
            rest.iter().map(|v| q.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>().clamp(0.0, 1.0)).collect();
        Ok(Scores { provider: self.kind(), values })
    }
}

/// Tries providers in order, moving on only when one is unavailable.
pub struct ProviderChain {
    providers: Vec<Arc<dyn SimilarityProvider>>,
}

impl ProviderChain {
    pub fn new(providers: Vec<Arc<dyn SimilarityProvider>>) -> Self {
        assert!(!providers.is_empty(), "provider chain needs at least one provider");
        ProviderChain { providers }
    }
}

impl SimilarityProvider for ProviderChain {
    fn kind(&self) -> ProviderKind {
        self.providers[0].kind()
    }

    fn similarities(&self, cue: &str, candidates: &[&str]) -> Result<Scores, AlignError> {
        let mut last = None;
        for p in &self.providers {
            match p.similarities(cue, candidates) {
                Err(AlignError::ProviderUnavailable(msg)) => last = Some(AlignError::ProviderUnavailable(msg)),
                other => return other,
            }
        }
        Err(last.expect("chain is non-empty"))
    }
}

/// Provider settings as they appear in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderSpec {
    CharNgram {
        #[serde(default = "default_n")]
        n: usize,
    },
    TokenTfidf {
        #[serde(default)]
        rules: TokenRules,
    },
    RemoteEmbedding {
        endpoint: String,
        model: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default)]
        cache_path: Option<PathBuf>,
    },
}

fn default_n() -> usize {
    3
}

fn default_timeout_ms() -> u64 {
    10_000
}

impl Default for ProviderSpec {
    fn default() -> Self {
        ProviderSpec::CharNgram { n: default_n() }
    }
}

impl ProviderSpec {
    /// Builds the provider. `documents` feed TF-IDF document frequencies.
    pub fn build(&self, documents: &[&str]) -> Result<Arc<dyn SimilarityProvider>, AlignError> {
        Ok(match self {
            ProviderSpec::CharNgram { n } => {
                if *n == 0 {
                    return Err(AlignError::InvalidConfig("n-gram size must be at least 1".into()));
                }
                Arc::new(CharNgram { n: *n })
            }
            ProviderSpec::TokenTfidf { rules } => Arc::new(TokenTfidf::fit(documents.iter().copied(), rules.clone())),
            ProviderSpec::RemoteEmbedding { endpoint, model, timeout_ms, cache_path } => {
                let cache = match cache_path {
                    Some(p) => EmbeddingCache::open(p).map_err(|e| AlignError::InvalidConfig(e.to_string()))?,
                    None => EmbeddingCache::in_memory(),
                };
                let transport = HttpTransport::new(endpoint, Duration::from_millis(*timeout_ms));
                Arc::new(RemoteEmbedding::new(RemoteEmbedder::new(model, Arc::new(transport), Arc::new(cache))))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    SmallestNodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Best similarity below this leaves the cue unaligned.
    pub threshold: f64,
    pub candidate_kinds: BTreeSet<NodeKind>,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            threshold: 0.15,
            candidate_kinds: BTreeSet::from([NodeKind::Sentence, NodeKind::Chunk]),
            tie_break: TieBreak::SmallestNodeId,
        }
    }
}

impl AlignConfig {
    pub fn check(&self) -> Result<(), AlignError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(AlignError::InvalidConfig(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    #[serde(default)]
    pub response_id: String,
    #[serde(default)]
    pub criterion_id: String,
    pub node_id: String,
    pub similarity: f64,
    pub runner_up_node_id: Option<String>,
    /// Best similarity minus runner-up similarity (minus 0 with one candidate).
    pub margin: f64,
    pub provider_kind: ProviderKind,
    pub threshold: f64,
    pub aligned: bool,
}

impl AlignmentResult {
    pub fn with_subject(mut self, response_id: &str, criterion_id: &str) -> Self {
        self.response_id = response_id.to_string();
        self.criterion_id = criterion_id.to_string();
        self
    }
}

/// Aligns a justification cue to the most similar eligible node.
pub fn align_cue(
    adg: &Adg,
    cue: &str,
    provider: &dyn SimilarityProvider,
    config: &AlignConfig,
) -> Result<AlignmentResult, AlignError> {
    config.check()?;
    if cue.trim().is_empty() {
        return Err(AlignError::EmptyCue);
    }
    let mut candidates: Vec<(&str, &str)> = adg
        .nodes
        .iter()
        .filter(|n| config.candidate_kinds.contains(&n.kind))
        .map(|n| (n.id.as_str(), n.text.as_str()))
        .collect();
    candidates.sort_by(|a, b| a.0.cmp(b.0));
    candidates.dedup_by(|a, b| a.0 == b.0);
    if candidates.is_empty() {
        return Err(AlignError::NoCandidates);
    }

    let texts: Vec<&str> = candidates.iter().map(|c| c.1).collect();
    let scores = provider.similarities(cue, &texts)?;
    if scores.values.len() != candidates.len() {
        return Err(AlignError::ProviderUnavailable(format!(
            "{} scores for {} candidates",
            scores.values.len(),
            candidates.len()
        )));
    }
    let values: Vec<f64> = scores.values.iter().map(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 }).collect();

    // candidates are id-sorted, so the first maximum is the smallest id
    let best = argmax(&values, None);
    let runner_up = (candidates.len() > 1).then(|| argmax(&values, Some(best)));
    let similarity = values[best];
    let margin = similarity - runner_up.map_or(0.0, |i| values[i]);
    Ok(AlignmentResult {
        response_id: String::new(),
        criterion_id: String::new(),
        node_id: candidates[best].0.to_string(),
        similarity,
        runner_up_node_id: runner_up.map(|i| candidates[i].0.to_string()),
        margin,
        provider_kind: scores.provider,
        threshold: config.threshold,
        aligned: similarity >= config.threshold,
    })
}

fn argmax(values: &[f64], skip: Option<usize>) -> usize {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best.expect("at least one candidate")
}
