//! Prompts, rubrics, scored responses and justification cues.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use thiserror::Error;

use crate::report::{Finding, Subject};
use crate::span::{char_len, Span};

pub const CORPUS_SCHEMA: &str = "adg-corpus/1";
pub const MANIFEST_SCHEMA: &str = "adg-corpus-manifest/1";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unsupported schema {found:?} (expected {expected:?})")]
    Schema { found: String, expected: &'static str },
    #[error("prompt {prompt}: {reason}")]
    InvalidPrompt { prompt: String, reason: String },
    #[error("duplicate {what} id {id:?}")]
    Duplicate { what: &'static str, id: String },
    #[error("response {response} refers to unknown prompt {prompt:?}")]
    UnknownPrompt { response: String, prompt: String },
    #[error("response {response}: unknown criterion {criterion:?}")]
    UnknownCriterion { response: String, criterion: String },
    #[error("response {response}: score {score} for criterion {criterion} exceeds max {max}")]
    ScoreRange { response: String, criterion: String, score: u32, max: u32 },
    #[error("response {response}: cue span {span} for criterion {criterion} outside text of {len} characters")]
    CueSpanRange { response: String, criterion: String, span: Span, len: usize },
    #[error("oracle entry for ({response}, {criterion}) does not match a scored response")]
    UnknownOracle { response: String, criterion: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CorpusError {
    pub fn code(&self) -> &'static str {
        match self {
            CorpusError::Syntax { .. } => "syntax",
            CorpusError::Schema { .. } => "unsupported-schema",
            CorpusError::InvalidPrompt { .. } => "invalid-prompt",
            CorpusError::Duplicate { .. } => "duplicate-id",
            CorpusError::UnknownPrompt { .. } => "unknown-prompt",
            CorpusError::UnknownCriterion { .. } => "unknown-criterion",
            CorpusError::ScoreRange { .. } => "score-range",
            CorpusError::CueSpanRange { .. } => "cue-span-range",
            CorpusError::UnknownOracle { .. } => "unknown-oracle",
            CorpusError::Io { .. } => "io",
        }
    }

    /// Criterion the error is about, when there is one.
    pub fn criterion(&self) -> Option<&str> {
        match self {
            CorpusError::UnknownCriterion { criterion, .. }
            | CorpusError::ScoreRange { criterion, .. }
            | CorpusError::CueSpanRange { criterion, .. }
            | CorpusError::UnknownOracle { criterion, .. } => Some(criterion),
            _ => None,
        }
    }

    fn from_json(e: serde_json::Error) -> Self {
        CorpusError::Syntax { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthConstraint {
    pub min_chars: usize,
    pub max_chars: usize,
}

impl LengthConstraint {
    pub fn admits(&self, text: &str) -> bool {
        (self.min_chars..=self.max_chars).contains(&char_len(text))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Criterion {
    pub id: String,
    pub description: String,
    /// Short rubric wording quoted in feedback; the description is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excerpt: Option<String>,
    pub max_score: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sub_criteria: Vec<Criterion>,
}

impl Criterion {
    pub fn excerpt(&self) -> &str {
        self.excerpt.as_deref().unwrap_or(&self.description)
    }

    fn walk<'a>(&'a self, out: &mut Vec<&'a Criterion>) {
        out.push(self);
        for sub in &self.sub_criteria {
            sub.walk(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSpec {
    pub id: String,
    pub prompt_text: String,
    pub question: String,
    pub length_constraint: LengthConstraint,
    pub criteria: Vec<Criterion>,
    /// Official model answer and explanation handed out without feedback.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
}

impl PromptSpec {
    /// Top-level criteria and all their sub-criteria, depth first.
    pub fn all_criteria(&self) -> Vec<&Criterion> {
        let mut out = Vec::new();
        for c in &self.criteria {
            c.walk(&mut out);
        }
        out
    }

    pub fn criterion(&self, id: &str) -> Option<&Criterion> {
        self.all_criteria().into_iter().find(|c| c.id == id)
    }

    pub fn max_total(&self) -> u32 {
        self.criteria.iter().map(|c| c.max_score).sum()
    }

    pub fn check(&self) -> Result<(), CorpusError> {
        let invalid = |reason: String| CorpusError::InvalidPrompt { prompt: self.id.clone(), reason };
        if self.criteria.is_empty() {
            return Err(invalid("no criteria".into()));
        }
        let lc = self.length_constraint;
        if lc.min_chars > lc.max_chars {
            return Err(invalid(format!("min_chars {} > max_chars {}", lc.min_chars, lc.max_chars)));
        }
        let mut ids = BTreeSet::new();
        for c in self.all_criteria() {
            if !ids.insert(c.id.as_str()) {
                return Err(invalid(format!("criterion id {:?} repeated", c.id)));
            }
            let sub_total: u32 = c.sub_criteria.iter().map(|s| s.max_score).sum();
            if !c.sub_criteria.is_empty() && c.max_score < sub_total {
                return Err(invalid(format!(
                    "criterion {} max_score {} below sub-criteria total {sub_total}",
                    c.id, c.max_score
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionScore {
    pub score: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cue_span: Option<Span>,
    /// Criterion-specific error type annotated upstream; selects analytic templates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_signature: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoredResponse {
    pub response_id: String,
    pub prompt_id: String,
    pub text: String,
    pub per_criterion: BTreeMap<String, CriterionScore>,
}

impl ScoredResponse {
    /// Checks scores and cue spans against a prompt's rubric.
    pub fn check_against(&self, prompt: &PromptSpec) -> Result<(), CorpusError> {
        let len = char_len(&self.text);
        for (cid, entry) in &self.per_criterion {
            let criterion = prompt.criterion(cid).ok_or_else(|| CorpusError::UnknownCriterion {
                response: self.response_id.clone(),
                criterion: cid.clone(),
            })?;
            if entry.score > criterion.max_score {
                return Err(CorpusError::ScoreRange {
                    response: self.response_id.clone(),
                    criterion: cid.clone(),
                    score: entry.score,
                    max: criterion.max_score,
                });
            }
            if let Some(span) = entry.cue_span {
                if !span.fits(len) {
                    return Err(CorpusError::CueSpanRange {
                        response: self.response_id.clone(),
                        criterion: cid.clone(),
                        span,
                        len,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn score(&self, criterion: &str) -> u32 {
        self.per_criterion.get(criterion).map_or(0, |c| c.score)
    }
}

/// Substring of the response at the criterion's cue span. Empty spans count
/// as no cue.
pub fn cue_text(response: &ScoredResponse, criterion: &str) -> Result<Option<String>, CorpusError> {
    let entry = response.per_criterion.get(criterion).ok_or_else(|| CorpusError::UnknownCriterion {
        response: response.response_id.clone(),
        criterion: criterion.to_string(),
    })?;
    let Some(span) = entry.cue_span.filter(|s| !s.is_empty()) else {
        return Ok(None);
    };
    span.slice(&response.text).map(|s| Some(s.to_string())).ok_or(CorpusError::CueSpanRange {
        response: response.response_id.clone(),
        criterion: criterion.to_string(),
        span,
        len: char_len(&response.text),
    })
}

/// Gold response node for one (response, criterion) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleNode {
    pub response_id: String,
    pub criterion_id: String,
    pub node_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corpus {
    pub schema: String,
    pub prompts: Vec<PromptSpec>,
    #[serde(default)]
    pub responses: Vec<ScoredResponse>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub oracle_nodes: Vec<OracleNode>,
}

impl Corpus {
    pub fn prompt(&self, id: &str) -> Option<&PromptSpec> {
        self.prompts.iter().find(|p| p.id == id)
    }

    pub fn response(&self, id: &str) -> Option<&ScoredResponse> {
        self.responses.iter().find(|r| r.response_id == id)
    }

    pub fn oracle_node(&self, response_id: &str, criterion_id: &str) -> Option<&str> {
        self.oracle_nodes
            .iter()
            .find(|o| o.response_id == response_id && o.criterion_id == criterion_id)
            .map(|o| o.node_id.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("corpus serializes")
    }

    /// Referential and range checks applied on load.
    pub fn check(&self) -> Result<(), CorpusError> {
        if self.schema != CORPUS_SCHEMA {
            return Err(CorpusError::Schema { found: self.schema.clone(), expected: CORPUS_SCHEMA });
        }
        let mut ids = BTreeSet::new();
        for p in &self.prompts {
            if !ids.insert(p.id.as_str()) {
                return Err(CorpusError::Duplicate { what: "prompt", id: p.id.clone() });
            }
            p.check()?;
        }
        let mut ids = BTreeSet::new();
        for r in &self.responses {
            if !ids.insert(r.response_id.as_str()) {
                return Err(CorpusError::Duplicate { what: "response", id: r.response_id.clone() });
            }
            let prompt = self.prompt(&r.prompt_id).ok_or_else(|| CorpusError::UnknownPrompt {
                response: r.response_id.clone(),
                prompt: r.prompt_id.clone(),
            })?;
            r.check_against(prompt)?;
        }
        for o in &self.oracle_nodes {
            let known = self.response(&o.response_id).is_some_and(|r| r.per_criterion.contains_key(&o.criterion_id));
            if !known {
                return Err(CorpusError::UnknownOracle {
                    response: o.response_id.clone(),
                    criterion: o.criterion_id.clone(),
                });
            }
        }
        Ok(())
    }

    /// Non-fatal ingestion findings: scores awarded without a usable cue.
    pub fn warnings(&self) -> Vec<Finding> {
        let mut out = Vec::new();
        for r in &self.responses {
            for (cid, entry) in &r.per_criterion {
                if entry.score > 0 && entry.cue_span.is_none_or(|s| s.is_empty()) {
                    out.push(Finding::warning(
                        "score-without-cue",
                        Subject::Response(r.response_id.clone()),
                        format!("criterion {cid} scored {} without a justification cue", entry.score),
                    ));
                }
            }
        }
        out
    }
}

pub fn load_corpus(document: &str) -> Result<Corpus, CorpusError> {
    let corpus: Corpus = serde_json::from_str(document).map_err(CorpusError::from_json)?;
    corpus.check()?;
    Ok(corpus)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    schema: String,
    prompts: Vec<PromptSpec>,
    response_files: Vec<String>,
    #[serde(default)]
    oracle_nodes: Vec<OracleNode>,
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })
}

/// Loads a corpus file, or a directory holding `manifest.json` plus one
/// file per response.
pub fn load_corpus_path(path: &Path) -> Result<Corpus, CorpusError> {
    if !path.is_dir() {
        return load_corpus(&read(path)?);
    }
    let manifest: Manifest =
        serde_json::from_str(&read(&path.join("manifest.json"))?).map_err(CorpusError::from_json)?;
    if manifest.schema != MANIFEST_SCHEMA {
        return Err(CorpusError::Schema { found: manifest.schema, expected: MANIFEST_SCHEMA });
    }
    let mut responses = Vec::with_capacity(manifest.response_files.len());
    for file in &manifest.response_files {
        let doc = read(&path.join(file))?;
        responses.push(serde_json::from_str(&doc).map_err(CorpusError::from_json)?);
    }
    let corpus = Corpus {
        schema: CORPUS_SCHEMA.to_string(),
        prompts: manifest.prompts,
        responses,
        oracle_nodes: manifest.oracle_nodes,
    };
    corpus.check()?;
    Ok(corpus)
}

/// Sentence terminators and closing quotes for [`split_sentences`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRules {
    pub terminators: Vec<char>,
    pub closing_quotes: Vec<char>,
    /// Attach closing quotes that directly follow a terminator to that sentence.
    pub absorb_closing_quotes: bool,
}

impl Default for SplitRules {
    fn default() -> Self {
        SplitRules {
            terminators: vec!['。', '．', '.', '!', '?', '！', '？'],
            closing_quotes: vec!['」', '』', '）', ')', '"', '”', '’', '】'],
            absorb_closing_quotes: true,
        }
    }
}

/// Splits text into sentence spans for graph authoring. Whitespace between
/// sentences belongs to no span.
pub fn split_sentences(text: &str, rules: &SplitRules) -> Vec<Span> {
    let chars: Vec<char> = text.chars().collect();
    let mut spans = Vec::new();
    let mut start = None;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if start.is_none() {
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            start = Some(i);
        }
        if rules.terminators.contains(&c) {
            let mut end = i + 1;
            while end < chars.len() && rules.terminators.contains(&chars[end]) {
                end += 1;
            }
            if rules.absorb_closing_quotes {
                while end < chars.len() && rules.closing_quotes.contains(&chars[end]) {
                    end += 1;
                }
            }
            spans.push(Span::new(start.take().expect("inside a sentence"), end));
            i = end;
            continue;
        }
        i += 1;
    }
    if let Some(s) = start {
        let mut end = chars.len();
        while end > s && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        spans.push(Span::new(s, end));
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const FIG1: &str = r#"{
        "schema": "adg-corpus/1",
        "prompts": [{
            "id": "p1",
            "prompt_text": "Language is a symbol. It is abstract.",
            "question": "Explain what the author means by language.",
            "length_constraint": {"min_chars": 70, "max_chars": 80},
            "criteria": [
                {"id": "A1", "description": "Mentions that words stand for things", "max_score": 2},
                {"id": "B", "description": "States that language is an abstract symbol",
                 "excerpt": "Language is an abstract symbol", "max_score": 2,
                 "sub_criteria": [
                    {"id": "B1", "description": "symbol", "max_score": 1},
                    {"id": "B2", "description": "abstract", "max_score": 1}
                 ]},
                {"id": "C", "description": "Links to thinking", "max_score": 1}
            ]
        }],
        "responses": [{
            "response_id": "r1",
            "prompt_id": "p1",
            "text": "Language is a symbol that people share, and it shapes thought.",
            "per_criterion": {
                "A1": {"score": 0},
                "B": {"score": 1, "cue_span": [0, 20]},
                "B1": {"score": 1, "cue_span": [0, 20]},
                "C": {"score": 1, "cue_span": [44, 61]}
            }
        }]
    }"#;

    #[test]
    fn loads_fig1_style_corpus() {
        let c = load_corpus(FIG1).unwrap();
        let r = &c.responses[0];
        assert_eq!(cue_text(r, "B").unwrap().as_deref(), Some("Language is a symbol"));
        assert_eq!(cue_text(r, "C").unwrap().as_deref(), Some("it shapes thought"));
        assert_eq!(cue_text(r, "A1").unwrap(), None);
        assert!(c.warnings().is_empty());
        assert_eq!(c.prompts[0].max_total(), 5);
        assert_eq!(c.prompts[0].criterion("B2").unwrap().max_score, 1);
    }

    #[test]
    fn empty_responses_are_fine() {
        let doc = FIG1.replace(r#""responses": ["#, r#""unused": ["#);
        assert!(load_corpus(&doc).is_err());
        let mut c = load_corpus(FIG1).unwrap();
        c.responses.clear();
        let c = load_corpus(&c.to_json()).unwrap();
        assert!(c.responses.is_empty());
    }

    #[test]
    fn score_range_and_span_errors() {
        let doc = FIG1.replace(r#""B": {"score": 1"#, r#""B": {"score": 3"#);
        assert_eq!(load_corpus(&doc).unwrap_err().code(), "score-range");
        let doc = FIG1.replace("[44, 61]", "[44, 99]");
        let err = load_corpus(&doc).unwrap_err();
        assert_eq!(err.code(), "cue-span-range");
        assert_eq!(err.criterion(), Some("C"));
        let doc = FIG1.replace(r#""prompt_id": "p1""#, r#""prompt_id": "p9""#);
        assert_eq!(load_corpus(&doc).unwrap_err().code(), "unknown-prompt");
        let doc = FIG1.replace(r#""C": {"score": 1, "#, r#""Z": {"score": 1, "#);
        assert_eq!(load_corpus(&doc).unwrap_err().code(), "unknown-criterion");
        assert_eq!(load_corpus("{").unwrap_err().code(), "syntax");
    }

    #[test]
    fn invalid_prompts_rejected() {
        let doc = FIG1.replace(r#""min_chars": 70"#, r#""min_chars": 90"#);
        assert_eq!(load_corpus(&doc).unwrap_err().code(), "invalid-prompt");
        let doc = FIG1.replace(r#""excerpt": "Language is an abstract symbol", "max_score": 2"#, r#""max_score": 1"#);
        assert_eq!(load_corpus(&doc).unwrap_err().code(), "invalid-prompt");
    }

    #[test]
    fn score_without_cue_warns() {
        let doc = FIG1.replace(r#""C": {"score": 1, "cue_span": [44, 61]}"#, r#""C": {"score": 1}"#);
        let c = load_corpus(&doc).unwrap();
        let w = c.warnings();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].code, "score-without-cue");
    }

    #[test]
    fn empty_cue_span_is_absent() {
        let doc = FIG1.replace("[44, 61]", "[0, 0]");
        let c = load_corpus(&doc).unwrap();
        assert_eq!(cue_text(&c.responses[0], "C").unwrap(), None);
        assert!(cue_text(&c.responses[0], "Q").is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let c = load_corpus(FIG1).unwrap();
        assert_eq!(load_corpus(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn loads_directory_layout() {
        let c = load_corpus(FIG1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = serde_json::json!({
            "schema": MANIFEST_SCHEMA,
            "prompts": c.prompts,
            "response_files": ["r1.json"],
        });
        fs::write(dir.path().join("manifest.json"), manifest.to_string()).unwrap();
        fs::write(dir.path().join("r1.json"), serde_json::to_string(&c.responses[0]).unwrap()).unwrap();
        assert_eq!(load_corpus_path(dir.path()).unwrap(), c);
    }

    #[test]
    fn splits_terminated_sentences() {
        let rules = SplitRules::default();
        assert_eq!(split_sentences("A。B。", &rules), [Span::new(0, 2), Span::new(2, 4)]);
        assert!(split_sentences("", &rules).is_empty());
        assert!(split_sentences("  \n ", &rules).is_empty());
        assert_eq!(
            split_sentences(" One. Two!? three", &rules),
            [Span::new(1, 5), Span::new(6, 11), Span::new(12, 17)]
        );
    }

    #[test]
    fn absorbs_closing_quote() {
        let text = "彼は「そうだった。」次の日に来た。";
        let spans = split_sentences(text, &SplitRules::default());
        let parts: Vec<_> = spans.iter().map(|s| s.slice(text).unwrap()).collect();
        assert_eq!(parts, ["彼は「そうだった。」", "次の日に来た。"]);
    }

    proptest! {
        #[test]
        fn spans_reconstruct_text(text in "[a-cあ。.!？」 \n]{0,40}") {
            let spans = split_sentences(&text, &SplitRules::default());
            let chars: Vec<char> = text.chars().collect();
            let mut cursor = 0;
            for s in &spans {
                prop_assert!(s.start >= cursor && s.start < s.end);
                prop_assert!(chars[cursor..s.start].iter().all(|c| c.is_whitespace()));
                prop_assert!(!chars[s.start].is_whitespace());
                cursor = s.end;
            }
            prop_assert!(chars[cursor..].iter().all(|c| c.is_whitespace()));
        }

        #[test]
        fn cue_text_width_matches_span(text in "[a-zあ-お ]{1,30}", a in 0.0f64..1.0, w in 0.0f64..1.0) {
            let n = char_len(&text);
            let a = (a * n as f64) as usize;
            let w = (w * (n - a) as f64) as usize;
            let r = ScoredResponse {
                response_id: "r".into(),
                prompt_id: "p".into(),
                text: text.clone(),
                per_criterion: BTreeMap::from([(
                    "X".into(),
                    CriterionScore { score: 0, cue_span: Some(Span::new(a, a + w)), error_signature: None },
                )]),
            };
            let cue = cue_text(&r, "X").unwrap();
            let expected: String = text.chars().skip(a).take(w).collect();
            if w == 0 {
                prop_assert_eq!(cue, None);
            } else {
                prop_assert_eq!(cue.as_deref().map(char_len), Some(w));
                prop_assert_eq!(cue, Some(expected));
            }
        }
    }
}
