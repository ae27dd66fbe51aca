use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::ngram::{cosine, normalize, SparseVector};

/// How text is cut into tokens for TF-IDF weighting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRules {
    /// Runs of alphanumeric scripts written with spaces form one token.
    pub latin_words: bool,
    /// Han, kana and hangul characters become single-character tokens.
    pub cjk_chars: bool,
}

impl Default for TokenRules {
    fn default() -> Self {
        TokenRules { latin_words: true, cjk_chars: true }
    }
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF | 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0xAC00..=0xD7AF)
}

pub fn tokenize(text: &str, rules: &TokenRules) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in normalize(text).chars() {
        if is_cjk(c) {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if rules.cjk_chars {
                tokens.push(c.to_string());
            }
        } else if c.is_alphanumeric() {
            word.push(c);
        } else if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    if !rules.latin_words {
        tokens.retain(|t| t.chars().all(is_cjk));
    }
    tokens
}

/// Smoothed inverse document frequencies fitted on a document set.
#[derive(Debug, Clone)]
pub struct TfidfModel {
    rules: TokenRules,
    docs: usize,
    df: BTreeMap<String, usize>,
}

impl TfidfModel {
    pub fn fit<'a>(documents: impl IntoIterator<Item = &'a str>, rules: TokenRules) -> Self {
        let mut df = BTreeMap::new();
        let mut docs = 0;
        for doc in documents {
            docs += 1;
            let unique: BTreeSet<String> = tokenize(doc, &rules).into_iter().collect();
            for t in unique {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        TfidfModel { rules, docs, df }
    }

    pub fn idf(&self, token: &str) -> f64 {
        let df = self.df.get(token).copied().unwrap_or(0) as f64;
        ((1.0 + self.docs as f64) / (1.0 + df)).ln() + 1.0
    }

    pub fn vector(&self, text: &str) -> SparseVector {
        let mut tf = SparseVector::new();
        for t in tokenize(text, &self.rules) {
            *tf.entry(t).or_default() += 1.0;
        }
        for (t, w) in tf.iter_mut() {
            *w *= self.idf(t);
        }
        tf
    }

    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        cosine(&self.vector(a), &self.vector(b))
    }
}
