//! Validation findings shared by graph, corpus and registry checks.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

/// What a finding is about. Ordering follows the declaration order, then the id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Graph,
    Criterion(String),
    Edge(usize),
    Label(String),
    Node(String),
    Prompt(String),
    Response(String),
    Template(String),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Graph => write!(f, "graph"),
            Subject::Criterion(id) => write!(f, "criterion {id}"),
            Subject::Edge(i) => write!(f, "edge #{i}"),
            Subject::Label(name) => write!(f, "label {name}"),
            Subject::Node(id) => write!(f, "node {id}"),
            Subject::Prompt(id) => write!(f, "prompt {id}"),
            Subject::Response(id) => write!(f, "response {id}"),
            Subject::Template(key) => write!(f, "template {key}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub subject: Subject,
}

impl Finding {
    pub fn error(code: &str, subject: Subject, message: impl Into<String>) -> Self {
        Finding { severity: Severity::Error, code: code.to_string(), message: message.into(), subject }
    }

    pub fn warning(code: &str, subject: Subject, message: impl Into<String>) -> Self {
        Finding { severity: Severity::Warning, code: code.to_string(), message: message.into(), subject }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}] {}: {}", self.code, self.subject, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    /// Sorts findings by subject, then code, then message, and derives `ok`.
    pub fn from_findings(mut findings: Vec<Finding>) -> Self {
        findings.sort_by(|a, b| (&a.subject, &a.code, &a.message).cmp(&(&b.subject, &b.code, &b.message)));
        let ok = !findings.iter().any(|f| f.severity == Severity::Error);
        ValidationReport { ok, findings }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }

    pub fn merge(self, other: ValidationReport) -> Self {
        let mut all = self.findings;
        all.extend(other.findings);
        ValidationReport::from_findings(all)
    }
}
