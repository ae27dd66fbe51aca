//! Independent oracles shared by the integration and acceptance tests. None of
//! this calls into the library's numeric or similarity code.
#![allow(dead_code)]

use std::collections::HashMap;

/// Composite Simpson's rule with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Two-sided t p-value by quadrature. With `t = sqrt(df) tan(theta)` the
/// density becomes proportional to `cos(theta)^(df-1)` on `[0, pi/2)`, so no
/// gamma function is needed: p is a ratio of two integrals.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    let g = |theta: f64| theta.cos().powf(df - 1.0);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let theta0 = (t.abs() / df.sqrt()).atan();
    let n = 200_000;
    let total = simpson(g, 0.0, half_pi, n);
    let inner = simpson(g, 0.0, theta0, n);
    1.0 - inner / total
}

/// Upper-tail chi-square probability by quadrature. With `x = u^2` the
/// density is proportional to `u^(df-1) exp(-u^2/2)`; normalized numerically.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    let g = |u: f64| u.powf(df - 1.0) * (-u * u / 2.0).exp();
    let n = 200_000;
    let total = simpson(g, 0.0, 40.0, n);
    let inner = simpson(g, 0.0, x.sqrt(), n);
    1.0 - inner / total
}

/// Spot-check points for the t distribution: (statistic, df).
pub const T_POINTS: [(f64, f64); 20] = [
    (0.1, 1.0),
    (1.0, 1.0),
    (6.3, 1.0),
    (0.5, 2.0),
    (2.9, 2.0),
    (1.2, 2.5),
    (0.0, 4.0),
    (2.1, 4.0),
    (4.6, 4.0),
    (1.7, 9.3),
    (3.25, 9.3),
    (0.8, 17.0),
    (2.0, 33.7),
    (2.7, 33.7),
    (-1.97, 63.1),
    (3.78, 50.1),
    (0.25, 120.0),
    (2.6, 120.0),
    (1.96, 500.0),
    (5.0, 36.9),
];

/// Spot-check points for chi-square: (statistic, df).
pub const CHI_POINTS: [(f64, f64); 20] = [
    (0.0, 1.0),
    (0.2, 1.0),
    (1.0, 1.0),
    (3.84, 1.0),
    (6.63, 1.0),
    (12.0, 1.0),
    (0.5, 2.0),
    (5.99, 2.0),
    (14.1, 2.0),
    (1.0, 3.0),
    (7.8, 3.0),
    (2.0, 4.0),
    (13.3, 4.0),
    (4.35, 5.0),
    (20.5, 5.0),
    (10.0, 8.0),
    (3.0, 10.0),
    (18.3, 10.0),
    (30.0, 11.0),
    (44.0, 20.0),
];

/// Character n-gram counts, written independently of the library: NFKC is
/// approximated by requiring ASCII/kana test inputs, so only lowercasing and
/// whitespace collapsing matter here.
pub fn ngram_counts(text: &str, n: usize) -> HashMap<String, u32> {
    let cleaned: String = text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ");
    let chars: Vec<char> = cleaned.chars().collect();
    let mut out = HashMap::new();
    if chars.is_empty() {
        return out;
    }
    if chars.len() < n {
        out.insert(cleaned, 1);
        return out;
    }
    for w in chars.windows(n) {
        *out.entry(w.iter().collect::<String>()).or_insert(0) += 1;
    }
    out
}

pub fn count_cosine(a: &HashMap<String, u32>, b: &HashMap<String, u32>) -> f64 {
    let dot: u64 = a.iter().map(|(k, x)| *x as u64 * *b.get(k).unwrap_or(&0) as u64).sum();
    let na: u64 = a.values().map(|x| (*x as u64).pow(2)).sum();
    let nb: u64 = b.values().map(|x| (*x as u64).pow(2)).sum();
    if na == 0 || nb == 0 {
        return 0.0;
    }
    dot as f64 / ((na * nb) as f64).sqrt()
}

/// Brute-force response node: scan every (id, text) pair, keep the highest
/// similarity, first id in lexicographic order on ties.
pub fn brute_force_argmax(cue: &str, nodes: &[(String, String)], n: usize) -> (String, f64) {
    let q = ngram_counts(cue, n);
    let mut best: Option<(String, f64)> = None;
    for (id, text) in nodes {
        let s = count_cosine(&q, &ngram_counts(text, n));
        let better = match &best {
            None => true,
            Some((bid, bs)) => s > *bs + 1e-12 || ((s - *bs).abs() <= 1e-12 && id < bid),
        };
        if better {
            best = Some((id.clone(), s));
        }
    }
    best.unwrap()
}
