//! Tab-separated table input for the statistics commands.
//!
//! Blank lines and lines starting with `#` are ignored, as is a header line
//! whose first field is `id`. Trailing fields after the numbers are the
//! published results to compare against.
//!
//! - t rows: `id n1 mean1 sd1 n2 mean2 sd2 [marker]`
//! - count rows: `id c1 .. ck [marker [majority]]`, majority as a roman numeral
//! - Likert rows: `id c1 .. c6 [markers]`, markers as `neg-neu/neg-pos/neu-pos`

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

use super::{
    chi_square_gof, majority_category, pairwise_tests, trichotomize, welch_t, ChiSquareOptions, GroupPair,
    LikertCounts, MarkerScale, StatsError, SummaryStats, TestResult,
};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct TableError {
    pub line: usize,
    pub message: String,
}

impl TableError {
    pub fn code(&self) -> &'static str {
        "table-syntax"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub label: String,
    pub result: TestResult,
    pub marker: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowOutcome {
    pub id: String,
    /// Statistic name: `t` or `chi2`.
    pub test: String,
    pub cells: Vec<Cell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub majority: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_majority: Option<String>,
}

impl RowOutcome {
    /// Whether every published value is reproduced; `None` when nothing was published.
    pub fn matches(&self) -> Option<bool> {
        let mut any = false;
        let mut all = true;
        for cell in &self.cells {
            if let Some(p) = &cell.published {
                any = true;
                all &= *p == cell.marker;
            }
        }
        if let Some(p) = &self.published_majority {
            any = true;
            all &= Some(p) == self.majority.as_ref();
        }
        any.then_some(all)
    }

    /// One human-readable line.
    pub fn line(&self) -> String {
        let mut out = self.id.clone();
        for cell in &self.cells {
            let r = &cell.result;
            let _ = write!(out, "  ");
            if !cell.label.is_empty() {
                let _ = write!(out, "{} ", cell.label);
            }
            let _ = write!(out, "{}={:.3} df={:.1} p={:.3e} {}", self.test, r.statistic, r.df, r.p_value, cell.marker);
            if let Some(p) = &cell.published {
                let _ = write!(out, " (paper {p})");
            }
        }
        if let Some(m) = &self.majority {
            let _ = write!(out, "  majority={m}");
            if let Some(p) = &self.published_majority {
                let _ = write!(out, " (paper {p})");
            }
        }
        match self.matches() {
            Some(true) => out.push_str("  match"),
            Some(false) => out.push_str("  MISMATCH"),
            None => {}
        }
        out
    }
}

fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return None;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        (fields[0] != "id").then_some((i + 1, fields))
    })
}

fn number<T: std::str::FromStr>(line: usize, field: &str, what: &str) -> Result<T, TableError> {
    field.parse().map_err(|_| TableError { line, message: format!("{what}: cannot parse {field:?}") })
}

fn stats_error(line: usize) -> impl Fn(StatsError) -> TableError {
    move |e| TableError { line, message: e.to_string() }
}

/// Welch t-test per row.
pub fn t_table(text: &str, scale: MarkerScale) -> Result<Vec<RowOutcome>, TableError> {
    rows(text)
        .map(|(line, f)| {
            if f.len() < 7 || f.len() > 8 {
                return Err(TableError { line, message: format!("expected 7 or 8 fields, got {}", f.len()) });
            }
            let group = |at: usize| -> Result<SummaryStats, TableError> {
                SummaryStats::new(
                    number(line, f[at], "n")?,
                    number(line, f[at + 1], "mean")?,
                    number(line, f[at + 2], "sd")?,
                )
                .map_err(stats_error(line))
            };
            let result = welch_t(&group(1)?, &group(4)?).map_err(stats_error(line))?;
            Ok(RowOutcome {
                id: f[0].to_string(),
                test: "t".into(),
                cells: vec![Cell {
                    label: String::new(),
                    marker: scale.marker(result.p_value).to_string(),
                    result,
                    published: f.get(7).map(|s| s.to_string()),
                }],
                majority: None,
                published_majority: None,
            })
        })
        .collect()
}

fn roman(i: usize) -> String {
    ["I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X"]
        .get(i)
        .map_or_else(|| (i + 1).to_string(), |s| s.to_string())
}

/// Chi-square goodness-of-fit per row, plus the majority category.
pub fn count_table(text: &str, scale: MarkerScale, options: &ChiSquareOptions) -> Result<Vec<RowOutcome>, TableError> {
    rows(text)
        .map(|(line, f)| {
            let counts: Vec<u64> = f[1..].iter().map_while(|s| s.parse().ok()).collect();
            let rest = &f[1 + counts.len()..];
            if rest.len() > 2 {
                return Err(TableError { line, message: format!("unexpected field {:?}", rest[0]) });
            }
            let result = chi_square_gof(&counts, options).map_err(stats_error(line))?;
            Ok(RowOutcome {
                id: f[0].to_string(),
                test: "chi2".into(),
                cells: vec![Cell {
                    label: String::new(),
                    marker: scale.marker(result.p_value).to_string(),
                    result,
                    published: rest.first().map(|s| s.to_string()),
                }],
                majority: majority_category(&counts).map(roman),
                published_majority: rest.get(1).map(|s| s.to_string()),
            })
        })
        .collect()
}

fn pair_label(pair: GroupPair) -> &'static str {
    match pair {
        GroupPair::NegativeNeutral => "neg-neu",
        GroupPair::NegativePositive => "neg-pos",
        GroupPair::NeutralPositive => "neu-pos",
    }
}

/// Trichotomizes six-point Likert rows and tests each pair of groups.
pub fn likert_table(text: &str, scale: MarkerScale, options: &ChiSquareOptions) -> Result<Vec<RowOutcome>, TableError> {
    rows(text)
        .map(|(line, f)| {
            if f.len() < 7 || f.len() > 8 {
                return Err(TableError { line, message: format!("expected 7 or 8 fields, got {}", f.len()) });
            }
            let mut counts = [0u64; 6];
            for (i, c) in counts.iter_mut().enumerate() {
                *c = number(line, f[i + 1], "count")?;
            }
            let published: Option<Vec<&str>> = f.get(7).map(|s| s.split('/').map(str::trim).collect());
            if published.as_ref().is_some_and(|p| p.len() != 3) {
                return Err(TableError { line, message: "expected three published markers".into() });
            }
            let tests = pairwise_tests(&trichotomize(&LikertCounts(counts)), options).map_err(stats_error(line))?;
            let cells = tests
                .into_iter()
                .enumerate()
                .map(|(i, (pair, result))| Cell {
                    label: pair_label(pair).to_string(),
                    marker: scale.marker(result.p_value).to_string(),
                    result,
                    published: published.as_ref().map(|p| p[i].to_string()),
                })
                .collect();
            Ok(RowOutcome {
                id: f[0].to_string(),
                test: "chi2".into(),
                cells,
                majority: None,
                published_majority: None,
            })
        })
        .collect()
}
