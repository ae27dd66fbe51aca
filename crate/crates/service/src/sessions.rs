//! Revision sessions: an initial answer, then re-answers, each attempt
//! recorded once and never rewritten.
//!
//! The file store keeps one JSON-lines log per session under
//! `sessions/<id>.jsonl`. The first line creates the session; every further
//! line is one attempt together with the report generated for it.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use adg_feedback::corpus::CriterionScore;
use adg_feedback::FeedbackReport;
use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Students see the official explanation only.
    ExplanationOnly,
    /// Students also get generated feedback.
    Feedback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    /// 1-based.
    pub index: u32,
    pub submitted_at: DateTime<Utc>,
    pub text: String,
    pub per_criterion: BTreeMap<String, CriterionScore>,
    pub total_score: u32,
    /// Total score change from the previous attempt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<i64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub criterion_deltas: BTreeMap<String, i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback_report_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub prompt_id: String,
    pub condition: Condition,
    pub created_at: DateTime<Utc>,
    /// Attempts accepted before the session closes.
    pub max_attempts: u32,
    pub attempts: Vec<Attempt>,
    pub closed: bool,
}

impl SessionRecord {
    pub fn latest(&self) -> Option<&Attempt> {
        self.attempts.last()
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session {0:?}")]
    NotFound(String),
    #[error("session {0:?} is closed")]
    Closed(String),
    #[error("session log {path}: {message}")]
    Storage { path: String, message: String },
}

/// What the caller computed for a new attempt, given the session so far.
pub struct NewAttempt {
    pub attempt: Attempt,
    pub report: Option<FeedbackReport>,
}

/// Persistence behind the session endpoints.
pub trait SessionStore: Send + Sync {
    fn create(&self, prompt_id: &str, condition: Condition, max_attempts: u32) -> Result<SessionRecord, SessionError>;

    fn get(&self, session_id: &str) -> Result<SessionRecord, SessionError>;

    /// Runs `build` against the current record and appends its result. Calls
    /// for one session are serialized; `build` may fail, in which case
    /// nothing is written.
    fn append_attempt(
        &self,
        session_id: &str,
        build: &mut dyn FnMut(&SessionRecord) -> Result<NewAttempt, crate::ApiError>,
    ) -> Result<Attempt, crate::ApiError>;

    fn report(&self, session_id: &str, report_id: &str) -> Result<Option<FeedbackReport>, SessionError>;
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Created {
        session_id: String,
        prompt_id: String,
        condition: Condition,
        created_at: DateTime<Utc>,
        max_attempts: u32,
    },
    Attempt {
        attempt: Attempt,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        report: Option<FeedbackReport>,
    },
}

struct Session {
    record: SessionRecord,
    reports: BTreeMap<String, FeedbackReport>,
    log: File,
}

impl Session {
    fn apply(&mut self, event: Event) {
        if let Event::Attempt { attempt, report } = event {
            if let (Some(id), Some(report)) = (&attempt.feedback_report_id, report) {
                self.reports.insert(id.clone(), report);
            }
            self.record.attempts.push(attempt);
            self.record.closed = self.record.attempts.len() as u32 >= self.record.max_attempts;
        }
    }
}

/// Directory of append-only session logs, replayed into memory at startup.
pub struct FileSessionStore {
    dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl FileSessionStore {
    pub fn open(dir: &Path) -> Result<Self, SessionError> {
        let storage =
            |path: &Path, message: String| SessionError::Storage { path: path.display().to_string(), message };
        fs::create_dir_all(dir).map_err(|e| storage(dir, e.to_string()))?;
        let mut sessions = HashMap::new();
        let entries = fs::read_dir(dir).map_err(|e| storage(dir, e.to_string()))?;
        for entry in entries {
            let path = entry.map_err(|e| storage(dir, e.to_string()))?.path();
            if path.extension().is_some_and(|x| x == "jsonl") {
                let session = replay(&path)?;
                sessions.insert(session.record.session_id.clone(), Arc::new(Mutex::new(session)));
            }
        }
        Ok(FileSessionStore { dir: dir.to_path_buf(), sessions: RwLock::new(sessions) })
    }

    fn session(&self, session_id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        self.sessions.read().get(session_id).cloned().ok_or_else(|| SessionError::NotFound(session_id.to_string()))
    }

    fn path(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.jsonl"))
    }
}

fn append(log: &mut File, path: &Path, event: &Event) -> Result<(), SessionError> {
    let mut line = serde_json::to_string(event).expect("event serializes");
    line.push('\n');
    log.write_all(line.as_bytes())
        .and_then(|_| log.sync_data())
        .map_err(|e| SessionError::Storage { path: path.display().to_string(), message: e.to_string() })
}

/// Rebuilds a session from its log. An unterminated last line is the
/// remains of an interrupted append and is cut off.
fn replay(path: &Path) -> Result<Session, SessionError> {
    let storage = |message: String| SessionError::Storage { path: path.display().to_string(), message };
    let file = File::open(path).map_err(|e| storage(e.to_string()))?;
    let mut reader = BufReader::new(file);
    let mut events = Vec::new();
    let mut line = String::new();
    let mut valid_len = 0u64;
    let mut torn = false;
    loop {
        line.clear();
        let read = reader.read_line(&mut line).map_err(|e| storage(e.to_string()))?;
        if read == 0 {
            break;
        }
        if !line.ends_with('\n') {
            torn = true;
            break;
        }
        let event: Event =
            serde_json::from_str(line.trim_end()).map_err(|e| storage(format!("line {}: {e}", events.len() + 1)))?;
        events.push(event);
        valid_len += read as u64;
    }
    let log = OpenOptions::new().append(true).open(path).map_err(|e| storage(e.to_string()))?;
    if torn {
        log.set_len(valid_len).map_err(|e| storage(e.to_string()))?;
    }
    let mut events = events.into_iter();
    let Some(Event::Created { session_id, prompt_id, condition, created_at, max_attempts }) = events.next() else {
        return Err(storage("log does not start with a created event".into()));
    };
    let record = SessionRecord {
        session_id,
        prompt_id,
        condition,
        created_at,
        max_attempts,
        attempts: Vec::new(),
        closed: max_attempts == 0,
    };
    let mut session = Session { record, reports: BTreeMap::new(), log };
    for event in events {
        session.apply(event);
    }
    Ok(session)
}

impl SessionStore for FileSessionStore {
    fn create(&self, prompt_id: &str, condition: Condition, max_attempts: u32) -> Result<SessionRecord, SessionError> {
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let path = self.path(&session_id);
        let storage = |message: String| SessionError::Storage { path: path.display().to_string(), message };
        let mut log =
            OpenOptions::new().create_new(true).append(true).open(&path).map_err(|e| storage(e.to_string()))?;
        let created_at = Utc::now();
        append(
            &mut log,
            &path,
            &Event::Created {
                session_id: session_id.clone(),
                prompt_id: prompt_id.to_string(),
                condition,
                created_at,
                max_attempts,
            },
        )?;
        let record = SessionRecord {
            session_id: session_id.clone(),
            prompt_id: prompt_id.to_string(),
            condition,
            created_at,
            max_attempts,
            attempts: Vec::new(),
            closed: max_attempts == 0,
        };
        let session = Session { record: record.clone(), reports: BTreeMap::new(), log };
        self.sessions.write().insert(session_id, Arc::new(Mutex::new(session)));
        Ok(record)
    }

    fn get(&self, session_id: &str) -> Result<SessionRecord, SessionError> {
        Ok(self.session(session_id)?.lock().record.clone())
    }

    fn append_attempt(
        &self,
        session_id: &str,
        build: &mut dyn FnMut(&SessionRecord) -> Result<NewAttempt, crate::ApiError>,
    ) -> Result<Attempt, crate::ApiError> {
        let session = self.session(session_id)?;
        let mut session = session.lock();
        if session.record.closed {
            return Err(SessionError::Closed(session_id.to_string()).into());
        }
        let NewAttempt { attempt, report } = build(&session.record)?;
        let event = Event::Attempt { attempt: attempt.clone(), report };
        let path = self.path(session_id);
        append(&mut session.log, &path, &event)?;
        session.apply(event);
        Ok(attempt)
    }

    fn report(&self, session_id: &str, report_id: &str) -> Result<Option<FeedbackReport>, SessionError> {
        Ok(self.session(session_id)?.lock().reports.get(report_id).cloned())
    }
}

/// Total and per-criterion changes relative to the previous attempt.
pub fn deltas(
    previous: Option<&Attempt>,
    per_criterion: &BTreeMap<String, CriterionScore>,
    total: u32,
) -> (Option<i64>, BTreeMap<String, i64>) {
    let Some(prev) = previous else {
        return (None, BTreeMap::new());
    };
    let score = |m: &BTreeMap<String, CriterionScore>, id: &str| m.get(id).map_or(0, |c| c.score) as i64;
    let ids = prev.per_criterion.keys().chain(per_criterion.keys());
    let by_criterion = ids.map(|id| (id.clone(), score(per_criterion, id) - score(&prev.per_criterion, id))).collect();
    (Some(total as i64 - prev.total_score as i64), by_criterion)
}
