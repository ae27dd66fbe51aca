use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use super::FeedbackError;

pub const TEMPLATES_SCHEMA: &str = "adg-templates/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotName {
    ParagraphNumber,
    CriterionExcerpt,
    JustificationCue,
    AnswerHint,
    RelationName,
    ScoreFraction,
    NodeExcerpt,
}

impl SlotName {
    pub const ALL: [SlotName; 7] = [
        SlotName::ParagraphNumber,
        SlotName::CriterionExcerpt,
        SlotName::JustificationCue,
        SlotName::AnswerHint,
        SlotName::RelationName,
        SlotName::ScoreFraction,
        SlotName::NodeExcerpt,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SlotName::ParagraphNumber => "paragraph_number",
            SlotName::CriterionExcerpt => "criterion_excerpt",
            SlotName::JustificationCue => "justification_cue",
            SlotName::AnswerHint => "answer_hint",
            SlotName::RelationName => "relation_name",
            SlotName::ScoreFraction => "score_fraction",
            SlotName::NodeExcerpt => "node_excerpt",
        }
    }
}

impl fmt::Display for SlotName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SlotName {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        SlotName::ALL.into_iter().find(|n| n.as_str() == s).ok_or(())
    }
}

pub type SlotValues = BTreeMap<SlotName, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateScope {
    Generic,
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackTemplate {
    pub key: String,
    pub scope: TemplateScope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion_id: Option<String>,
    /// Error type an analytic template answers to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_signature: Option<String>,
    pub language: String,
    pub body: String,
    pub required_slots: BTreeSet<SlotName>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

/// Splits a body into literal text and `{name}` placeholders. `{{` and `}}`
/// stand for literal braces.
fn pieces(body: &str) -> Result<Vec<Piece<'_>>, String> {
    let mut out = Vec::new();
    let mut rest = body;
    while !rest.is_empty() {
        let Some(i) = rest.find(['{', '}']) else {
            out.push(Piece::Text(rest));
            break;
        };
        if i > 0 {
            out.push(Piece::Text(&rest[..i]));
        }
        let tail = &rest[i..];
        if let Some(after) = tail.strip_prefix("{{") {
            out.push(Piece::Text("{"));
            rest = after;
        } else if let Some(after) = tail.strip_prefix("}}") {
            out.push(Piece::Text("}"));
            rest = after;
        } else if tail.starts_with('}') {
            return Err("unmatched '}'".into());
        } else {
            let close = tail.find('}').ok_or_else(|| "unterminated placeholder".to_string())?;
            let name = &tail[1..close];
            if name.contains('{') {
                return Err(format!("malformed placeholder {{{name}"));
            }
            out.push(Piece::Slot(name));
            rest = &tail[close + 1..];
        }
    }
    Ok(out)
}

impl FeedbackTemplate {
    /// Placeholder names in body order, or a syntax problem.
    pub fn placeholders(&self) -> Result<Vec<&str>, String> {
        Ok(pieces(&self.body)?
            .into_iter()
            .filter_map(|p| match p {
                Piece::Slot(s) => Some(s),
                Piece::Text(_) => None,
            })
            .collect())
    }

    /// Every placeholder-level problem with this template, as messages.
    pub fn placeholder_problems(&self) -> Vec<String> {
        match self.placeholders() {
            Err(e) => vec![e],
            Ok(names) => names
                .into_iter()
                .filter_map(|name| match name.parse::<SlotName>() {
                    Err(()) => Some(format!("{{{name}}} is not a known slot")),
                    Ok(slot) if !self.required_slots.contains(&slot) => {
                        Some(format!("{{{name}}} is not listed in required_slots"))
                    }
                    Ok(_) => None,
                })
                .collect(),
        }
    }

    /// Scope invariants: analytic templates name a criterion, generic ones do not.
    pub fn scope_problem(&self) -> Option<String> {
        match (self.scope, &self.criterion_id) {
            (TemplateScope::Analytic, None) => Some("analytic template without criterion_id".into()),
            (TemplateScope::Generic, Some(_)) => Some("generic template with criterion_id".into()),
            _ => None,
        }
    }
}

/// Substitutes slot values into a template body.
pub fn render(template: &FeedbackTemplate, slots: &SlotValues) -> Result<String, FeedbackError> {
    for slot in &template.required_slots {
        if slots.get(slot).is_none_or(|v| v.trim().is_empty()) {
            return Err(FeedbackError::MissingSlot(*slot));
        }
    }
    let unknown = |placeholder: String| FeedbackError::UnknownPlaceholder { key: template.key.clone(), placeholder };
    let mut out = String::with_capacity(template.body.len());
    for piece in pieces(&template.body).map_err(unknown)? {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Slot(name) => {
                let slot = name
                    .parse::<SlotName>()
                    .ok()
                    .filter(|s| template.required_slots.contains(s))
                    .ok_or_else(|| unknown(name.to_string()))?;
                out.push_str(&slots[&slot]);
            }
        }
    }
    if out.trim().is_empty() {
        return Err(FeedbackError::EmptyRender(template.key.clone()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RegistryDocument {
    schema: String,
    templates: Vec<FeedbackTemplate>,
}

/// Feedback templates keyed by (key, language).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateRegistry {
    templates: Vec<FeedbackTemplate>,
}

impl TemplateRegistry {
    /// Wraps templates without checking them; see [`super::validate_registry`].
    pub fn from_templates(templates: Vec<FeedbackTemplate>) -> Self {
        TemplateRegistry { templates }
    }

    /// Parses a registry document without checking its templates.
    pub fn parse(document: &str) -> Result<Self, FeedbackError> {
        let doc: RegistryDocument = serde_json::from_str(document).map_err(|e| FeedbackError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if doc.schema != TEMPLATES_SCHEMA {
            return Err(FeedbackError::Schema { found: doc.schema });
        }
        Ok(TemplateRegistry { templates: doc.templates })
    }

    /// Parses a registry document and rejects malformed templates.
    pub fn load(document: &str) -> Result<Self, FeedbackError> {
        let registry = Self::parse(document)?;
        let mut seen = BTreeSet::new();
        for t in &registry.templates {
            if !seen.insert((t.key.as_str(), t.language.as_str())) {
                return Err(FeedbackError::DuplicateTemplate { key: t.key.clone(), language: t.language.clone() });
            }
            if let Some(problem) = t.placeholder_problems().into_iter().next() {
                return Err(FeedbackError::UnknownPlaceholder { key: t.key.clone(), placeholder: problem });
            }
            if let Some(problem) = t.scope_problem() {
                return Err(FeedbackError::InvalidTemplate { key: t.key.clone(), reason: problem });
            }
        }
        Ok(registry)
    }

    /// Built-in generic templates in English and Japanese.
    pub fn builtin() -> Self {
        Self::load(include_str!("../../data/generic_templates.json")).expect("built-in templates are valid")
    }

    pub fn to_json(&self) -> String {
        let doc = RegistryDocument { schema: TEMPLATES_SCHEMA.into(), templates: self.templates.clone() };
        serde_json::to_string_pretty(&doc).expect("registry serializes")
    }

    pub fn templates(&self) -> &[FeedbackTemplate] {
        &self.templates
    }

    pub fn with_template(mut self, template: FeedbackTemplate) -> Self {
        self.templates.push(template);
        self
    }

    pub fn without_key(mut self, key: &str) -> Self {
        self.templates.retain(|t| t.key != key);
        self
    }

    pub fn languages(&self) -> BTreeSet<&str> {
        self.templates.iter().map(|t| t.language.as_str()).collect()
    }

    pub fn get(&self, key: &str, language: &str) -> Option<&FeedbackTemplate> {
        self.templates.iter().find(|t| t.key == key && t.language == language)
    }

    pub fn has_key(&self, key: &str) -> bool {
        self.templates.iter().any(|t| t.key == key)
    }

    pub fn analytic(&self, criterion: &str, signature: &str, language: &str) -> Option<&FeedbackTemplate> {
        self.templates.iter().find(|t| {
            t.scope == TemplateScope::Analytic
                && t.language == language
                && t.criterion_id.as_deref() == Some(criterion)
                && t.error_signature.as_deref() == Some(signature)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template(body: &str, slots: &[SlotName]) -> FeedbackTemplate {
        FeedbackTemplate {
            key: "t".into(),
            scope: TemplateScope::Generic,
            criterion_id: None,
            error_signature: None,
            language: "en".into(),
            body: body.into(),
            required_slots: slots.iter().copied().collect(),
        }
    }

    #[test]
    fn renders_single_substitution() {
        let t = template("Your answer refers to paragraph {paragraph_number}.", &[SlotName::ParagraphNumber]);
        let slots = SlotValues::from([(SlotName::ParagraphNumber, "3".to_string())]);
        assert_eq!(render(&t, &slots).unwrap(), "Your answer refers to paragraph 3.");
    }

    #[test]
    fn ignores_unused_slots_and_handles_escapes() {
        let t = template("{{literal}} {score_fraction}", &[SlotName::ScoreFraction]);
        let slots = SlotValues::from([
            (SlotName::ScoreFraction, "1/2".to_string()),
            (SlotName::NodeExcerpt, "unused".to_string()),
        ]);
        assert_eq!(render(&t, &slots).unwrap(), "{literal} 1/2");
    }

    #[test]
    fn missing_slot_is_named() {
        let t = template("Hint: {answer_hint}", &[SlotName::AnswerHint]);
        let err = render(&t, &SlotValues::new()).unwrap_err();
        assert!(matches!(err, FeedbackError::MissingSlot(SlotName::AnswerHint)));
        assert_eq!(err.to_string(), "missing slot answer_hint");
        let blank = SlotValues::from([(SlotName::AnswerHint, " ".to_string())]);
        assert!(matches!(render(&t, &blank), Err(FeedbackError::MissingSlot(_))));
    }

    #[test]
    fn placeholder_problems() {
        assert!(template("{answer_hint}", &[SlotName::AnswerHint]).placeholder_problems().is_empty());
        assert_eq!(template("{answer_hint}", &[]).placeholder_problems().len(), 1);
        assert_eq!(template("{colour}", &[]).placeholder_problems().len(), 1);
        assert_eq!(template("open {brace", &[]).placeholder_problems().len(), 1);
        assert_eq!(template("close } brace", &[]).placeholder_problems().len(), 1);
    }

    #[test]
    fn load_rejects_undeclared_placeholders_and_duplicates() {
        let doc = |body: &str| {
            format!(
                r#"{{"schema": "adg-templates/1", "templates": [
                    {{"key": "k", "scope": "generic", "language": "en", "body": "{body}", "required_slots": []}}
                ]}}"#
            )
        };
        let err = TemplateRegistry::load(&doc("see {paragraph_number}")).unwrap_err();
        assert_eq!(err.code(), "unknown-placeholder");
        assert!(TemplateRegistry::parse(&doc("see {paragraph_number}")).is_ok());
        assert!(TemplateRegistry::load(&doc("plain")).is_ok());

        let r = TemplateRegistry::load(&doc("plain")).unwrap();
        let dup = r.clone().with_template(r.templates()[0].clone());
        assert_eq!(TemplateRegistry::load(&dup.to_json()).unwrap_err().code(), "duplicate-template");
    }

    #[test]
    fn builtin_registry_is_bilingual() {
        let r = TemplateRegistry::builtin();
        assert_eq!(r.languages(), BTreeSet::from(["en", "ja"]));
        for key in super::super::GENERIC_KEYS {
            assert!(r.get(key, "en").is_some(), "{key}");
            assert!(r.get(key, "ja").is_some(), "{key}");
        }
    }
}
