//! Request handling independent of the HTTP layer.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use adg_feedback::alignment::{AlignConfig, AlignError, ProviderKind, ProviderSpec, Scores, SimilarityProvider};
use adg_feedback::corpus::CriterionScore;
use adg_feedback::feedback::{generate_feedback, FeedbackConfig};
use adg_feedback::{FeedbackReport, PromptSpec, ScoredResponse, ValidationReport};
use axum::http::StatusCode;
use chrono::Utc;
use serde::{Deserialize, Serialize};

use crate::sessions::{deltas, Attempt, Condition, FileSessionStore, NewAttempt, SessionRecord, SessionStore};
use crate::store::{Catalog, StoreError};
use crate::ApiError;

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_language() -> String {
    "en".into()
}

fn default_max_attempts() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    /// Tried in order; later entries are fallbacks when earlier ones are unavailable.
    #[serde(default)]
    pub providers: Vec<ProviderSpec>,
    #[serde(default)]
    pub align: AlignConfig,
    #[serde(default = "default_language")]
    pub language: String,
    /// Static bearer token required on `/v1` routes when set.
    #[serde(default)]
    pub auth_token: Option<String>,
    /// Initial answer plus one re-answer, as in the classroom study.
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
}

impl ServiceConfig {
    pub fn new(data_dir: &Path) -> Self {
        ServiceConfig {
            listen: default_listen(),
            data_dir: data_dir.to_path_buf(),
            providers: Vec::new(),
            align: AlignConfig::default(),
            language: default_language(),
            auth_token: None,
            max_attempts: default_max_attempts(),
        }
    }
}

/// Counts similarity requests reaching the configured providers.
pub struct CountingProvider {
    inner: Arc<dyn SimilarityProvider>,
    calls: Arc<AtomicUsize>,
}

impl CountingProvider {
    pub fn wrap(inner: Arc<dyn SimilarityProvider>, calls: Arc<AtomicUsize>) -> Arc<dyn SimilarityProvider> {
        Arc::new(CountingProvider { inner, calls })
    }
}

impl SimilarityProvider for CountingProvider {
    fn kind(&self) -> ProviderKind {
        self.inner.kind()
    }

    fn similarities(&self, cue: &str, candidates: &[&str]) -> Result<Scores, AlignError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.similarities(cue, candidates)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRequest {
    pub prompt_id: String,
    #[serde(default)]
    pub response_id: Option<String>,
    pub text: String,
    pub per_criterion: BTreeMap<String, CriterionScore>,
    #[serde(default)]
    pub language: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub prompt_id: String,
    pub condition: Condition,
    #[serde(default)]
    pub max_attempts: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttemptRequest {
    pub text: String,
    pub per_criterion: BTreeMap<String, CriterionScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptAccepted {
    pub session_id: String,
    pub attempt: Attempt,
    pub closed: bool,
}

/// What the student sees after an attempt, depending on the session condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatestFeedback {
    Feedback { session_id: String, attempt: u32, report: FeedbackReport, text: String },
    Explanation { session_id: String, attempt: u32, explanation: Option<String> },
}

pub struct App {
    pub config: ServiceConfig,
    catalog: Catalog,
    sessions: Arc<dyn SessionStore>,
    provider_calls: Arc<AtomicUsize>,
}

impl App {
    /// Loads the data directory and opens the session store. Startup warnings
    /// are returned for logging.
    pub fn open(config: ServiceConfig) -> Result<(App, ValidationReport), StoreError> {
        let dir = &config.data_dir;
        if !dir.is_dir() {
            return Err(StoreError::Read { path: dir.display().to_string(), message: "not a directory".into() });
        }
        let sessions_dir = dir.join("sessions");
        let sessions = FileSessionStore::open(&sessions_dir)
            .map_err(|e| StoreError::Read { path: sessions_dir.display().to_string(), message: e.to_string() })?;
        Self::with_store(config, Arc::new(sessions))
    }

    pub fn with_store(
        config: ServiceConfig,
        sessions: Arc<dyn SessionStore>,
    ) -> Result<(App, ValidationReport), StoreError> {
        config.align.check().map_err(|e| StoreError::Provider(e.to_string()))?;
        let provider_calls = Arc::new(AtomicUsize::new(0));
        let calls = provider_calls.clone();
        let (catalog, warnings) =
            Catalog::load(&config.data_dir, &config.providers, &move |p| CountingProvider::wrap(p, calls.clone()))?;
        Ok((App { config, catalog, sessions, provider_calls }, warnings))
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    /// Similarity requests made so far, over all prompts.
    pub fn provider_calls(&self) -> usize {
        self.provider_calls.load(Ordering::Relaxed)
    }

    pub fn prompt(&self, id: &str) -> Result<&PromptSpec, ApiError> {
        self.catalog
            .entry(id)
            .map(|e| &e.prompt)
            .ok_or_else(|| ApiError::not_found("unknown-prompt", id, format!("unknown prompt {id:?}")))
    }

    fn feedback_for(&self, response: &ScoredResponse, language: Option<&str>) -> Result<FeedbackReport, ApiError> {
        let entry = self.catalog.entry(&response.prompt_id).ok_or_else(|| {
            ApiError::not_found(
                "unknown-prompt",
                &response.prompt_id,
                format!("unknown prompt {:?}", response.prompt_id),
            )
        })?;
        let (Some(adg), Some(provider)) = (&entry.adg, &entry.provider) else {
            return Err(ApiError::not_found(
                "no-graph",
                &response.prompt_id,
                format!("prompt {:?} has no diagnostic graph", response.prompt_id),
            ));
        };
        response.check_against(&entry.prompt)?;
        let config = FeedbackConfig {
            align: self.config.align.clone(),
            language: language.unwrap_or(&self.config.language).to_string(),
        };
        if !self.catalog.registry().languages().contains(config.language.as_str()) {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "unsupported-language",
                format!("no templates in language {:?}", config.language),
            )
            .about(config.language.clone()));
        }
        Ok(generate_feedback(adg, self.catalog.registry(), &entry.prompt, response, provider.as_ref(), &config)?)
    }

    pub fn generate(&self, request: FeedbackRequest) -> Result<FeedbackReport, ApiError> {
        let response = ScoredResponse {
            response_id: request.response_id.unwrap_or_else(|| "request".into()),
            prompt_id: request.prompt_id,
            text: request.text,
            per_criterion: request.per_criterion,
        };
        self.feedback_for(&response, request.language.as_deref())
    }

    pub fn create_session(&self, request: CreateSession) -> Result<SessionRecord, ApiError> {
        let prompt = self.prompt(&request.prompt_id)?;
        let max_attempts = request.max_attempts.unwrap_or(self.config.max_attempts);
        if max_attempts == 0 {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid-request",
                "max_attempts must be at least 1",
            ));
        }
        Ok(self.sessions.create(&prompt.id, request.condition, max_attempts)?)
    }

    pub fn session(&self, id: &str) -> Result<SessionRecord, ApiError> {
        Ok(self.sessions.get(id)?)
    }

    /// Records an attempt. Feedback is generated only in the feedback
    /// condition; a failure leaves the session unchanged.
    pub fn submit_attempt(&self, session_id: &str, request: AttemptRequest) -> Result<AttemptAccepted, ApiError> {
        let attempt = self.sessions.append_attempt(session_id, &mut |record| {
            let prompt = self.prompt(&record.prompt_id)?;
            let index = record.attempts.len() as u32 + 1;
            let response = ScoredResponse {
                response_id: format!("{}-{index}", record.session_id),
                prompt_id: prompt.id.clone(),
                text: request.text.clone(),
                per_criterion: request.per_criterion.clone(),
            };
            response.check_against(prompt)?;
            let report = match record.condition {
                Condition::Feedback => Some(self.feedback_for(&response, None)?),
                Condition::ExplanationOnly => None,
            };
            let total_score = prompt.criteria.iter().map(|c| response.score(&c.id)).sum();
            let (delta, criterion_deltas) = deltas(record.latest(), &response.per_criterion, total_score);
            Ok(NewAttempt {
                attempt: Attempt {
                    index,
                    submitted_at: Utc::now(),
                    text: response.text,
                    per_criterion: response.per_criterion,
                    total_score,
                    delta,
                    criterion_deltas,
                    feedback_report_id: report.as_ref().map(|r| r.response_id.clone()),
                },
                report,
            })
        })?;
        let closed = self.sessions.get(session_id)?.closed;
        Ok(AttemptAccepted { session_id: session_id.to_string(), attempt, closed })
    }

    pub fn latest_feedback(&self, session_id: &str) -> Result<LatestFeedback, ApiError> {
        let record = self.sessions.get(session_id)?;
        let attempt = record.latest().ok_or_else(|| {
            ApiError::not_found("no-attempt", session_id, format!("session {session_id:?} has no attempts yet"))
        })?;
        match record.condition {
            Condition::ExplanationOnly => Ok(LatestFeedback::Explanation {
                session_id: record.session_id.clone(),
                attempt: attempt.index,
                explanation: self.prompt(&record.prompt_id)?.explanation.clone(),
            }),
            Condition::Feedback => {
                let report_id = attempt.feedback_report_id.as_deref().unwrap_or_default();
                let report = self.sessions.report(session_id, report_id)?.ok_or_else(|| {
                    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", format!("report {report_id:?} missing"))
                })?;
                Ok(LatestFeedback::Feedback {
                    session_id: record.session_id.clone(),
                    attempt: attempt.index,
                    text: report.to_text(),
                    report,
                })
            }
        }
    }
}
