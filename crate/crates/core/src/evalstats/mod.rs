//! Hypothesis tests from summary statistics and category counts, and the
//! alignment accuracy harness.

mod accuracy;
pub mod dist;
pub mod tables;

pub use accuracy::{alignment_accuracy, AccuracyError, AccuracyReport};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("need at least two categories, got {0}")]
    TooFewCategories(usize),
    #[error("all counts are zero")]
    EmptySample,
    #[error("invalid expected proportions: {0}")]
    InvalidExpected(String),
}

impl StatsError {
    pub fn code(&self) -> &'static str {
        match self {
            StatsError::InvalidSample(_) => "invalid-sample",
            StatsError::TooFewCategories(_) => "too-few-categories",
            StatsError::EmptySample => "empty-sample",
            StatsError::InvalidExpected(_) => "invalid-expected",
        }
    }
}

/// Sample size, mean and sample standard deviation of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: u32,
    pub mean: f64,
    pub sd: f64,
}

impl SummaryStats {
    pub fn new(n: u32, mean: f64, sd: f64) -> Result<Self, StatsError> {
        let s = SummaryStats { n, mean, sd };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<(), StatsError> {
        if self.n < 2 {
            return Err(StatsError::InvalidSample(format!("n = {} (need at least 2)", self.n)));
        }
        if !(self.sd >= 0.0 && self.sd.is_finite()) || !self.mean.is_finite() {
            return Err(StatsError::InvalidSample(format!("mean = {}, sd = {}", self.mean, self.sd)));
        }
        Ok(())
    }
}

/// Significance at the two conventional levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "sig_01")]
    Sig01,
    #[serde(rename = "sig_05")]
    Sig05,
    #[serde(rename = "ns")]
    Ns,
}

impl Verdict {
    pub fn from_p(p: f64) -> Self {
        if p < 0.01 {
            Verdict::Sig01
        } else if p < 0.05 {
            Verdict::Sig05
        } else {
            Verdict::Ns
        }
    }

    pub fn marker(&self) -> &'static str {
        match self {
            Verdict::Sig01 => "**",
            Verdict::Sig05 => "*",
            Verdict::Ns => "ns",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.marker())
    }
}

/// How a published table prints significance. Some tables only define `**`
/// and `ns`, so anything short of p < 0.01 reads as `ns` there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerScale {
    #[default]
    ThreeLevel,
    TwoLevel,
}

impl MarkerScale {
    pub fn marker(&self, p: f64) -> &'static str {
        match self {
            MarkerScale::ThreeLevel => Verdict::from_p(p).marker(),
            MarkerScale::TwoLevel if p < 0.01 => "**",
            MarkerScale::TwoLevel => "ns",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub verdict: Verdict,
}

impl TestResult {
    fn new(statistic: f64, df: f64, p_value: f64) -> Self {
        TestResult { statistic, df, p_value, verdict: Verdict::from_p(p_value) }
    }
}

/// Two-sample unequal-variance t-test from summary statistics, two-sided.
pub fn welch_t(a: &SummaryStats, b: &SummaryStats) -> Result<TestResult, StatsError> {
    a.check()?;
    b.check()?;
    let (na, nb) = (a.n as f64, b.n as f64);
    let va = a.sd * a.sd / na;
    let vb = b.sd * b.sd / nb;
    let diff = a.mean - b.mean;
    let se2 = va + vb;
    if se2 == 0.0 {
        // no spread in either group: identical means are indistinguishable,
        // different ones infinitely far apart
        let df = na + nb - 2.0;
        return Ok(if diff == 0.0 {
            TestResult::new(0.0, df, 1.0)
        } else {
            TestResult::new(diff.signum() * f64::INFINITY, df, 0.0)
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TestResult::new(t, df, dist::t_two_sided(t, df)))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareOptions {
    /// Expected proportions per category; uniform when absent.
    #[serde(default)]
    pub expected: Option<Vec<f64>>,
    /// Continuity correction: shrink each |observed - expected| by 0.5.
    #[serde(default)]
    pub yates: bool,
}

/// Pearson goodness-of-fit test of counts against expected proportions.
pub fn chi_square_gof(counts: &[u64], options: &ChiSquareOptions) -> Result<TestResult, StatsError> {
    let k = counts.len();
    if k < 2 {
        return Err(StatsError::TooFewCategories(k));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(StatsError::EmptySample);
    }
    let proportions = match &options.expected {
        None => vec![1.0 / k as f64; k],
        Some(p) => {
            if p.len() != k {
                return Err(StatsError::InvalidExpected(format!("{} proportions for {} categories", p.len(), k)));
            }
            if p.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(StatsError::InvalidExpected("proportions must be positive".into()));
            }
            let sum: f64 = p.iter().sum();
            p.iter().map(|x| x / sum).collect()
        }
    };
    let n = total as f64;
    let statistic: f64 = counts
        .iter()
        .zip(&proportions)
        .map(|(&o, &p)| {
            let e = n * p;
            let mut d = (o as f64 - e).abs();
            if options.yates {
                d = (d - 0.5).max(0.0);
            }
            d * d / e
        })
        .sum();
    let df = (k - 1) as f64;
    Ok(TestResult::new(statistic, df, dist::chi_square_sf(statistic, df)))
}

/// Index of the strictly largest count; `None` on a tie for first place.
pub fn majority_category(counts: &[u64]) -> Option<usize> {
    let max = *counts.iter().max()?;
    let mut at = counts.iter().enumerate().filter(|(_, &c)| c == max).map(|(i, _)| i);
    let first = at.next();
    match at.next() {
        Some(_) => None,
        None => first,
    }
}

/// Six ordered Likert counts, strongly disagree first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LikertCounts(pub [u64; 6]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trichotomy {
    pub negative: u64,
    pub neutral: u64,
    pub positive: u64,
}

impl Trichotomy {
    pub fn total(&self) -> u64 {
        self.negative + self.neutral + self.positive
    }
}

/// Negative = first two categories, neutral = middle two, positive = last two.
pub fn trichotomize(likert: &LikertCounts) -> Trichotomy {
    let c = likert.0;
    Trichotomy { negative: c[0] + c[1], neutral: c[2] + c[3], positive: c[4] + c[5] }
}

/// Which two trichotomy groups a pairwise comparison contrasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupPair {
    NegativeNeutral,
    NegativePositive,
    NeutralPositive,
}

impl GroupPair {
    pub const ALL: [GroupPair; 3] =
        [GroupPair::NegativeNeutral, GroupPair::NegativePositive, GroupPair::NeutralPositive];

    pub fn counts(&self, t: &Trichotomy) -> [u64; 2] {
        match self {
            GroupPair::NegativeNeutral => [t.negative, t.neutral],
            GroupPair::NegativePositive => [t.negative, t.positive],
            GroupPair::NeutralPositive => [t.neutral, t.positive],
        }
    }
}

/// Two-category 50/50 goodness-of-fit for each pair of groups.
pub fn pairwise_tests(t: &Trichotomy, options: &ChiSquareOptions) -> Result<Vec<(GroupPair, TestResult)>, StatsError> {
    GroupPair::ALL.iter().map(|pair| Ok((*pair, chi_square_gof(&pair.counts(t), options)?))).collect()
}
