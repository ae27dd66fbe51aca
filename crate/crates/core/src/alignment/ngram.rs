use std::collections::BTreeMap;
use unicode_normalization::UnicodeNormalization;

/// Sparse non-negative weights keyed by feature.
pub type SparseVector = BTreeMap<String, f64>;

/// NFKC, lowercase, collapse whitespace runs to one space, trim.
pub fn normalize(text: &str) -> String {
    let folded: String = text.nfkc().flat_map(char::to_lowercase).collect();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Counts of overlapping character n-grams of the normalized text. Text
/// shorter than `n` becomes a single gram; empty text gives an empty vector.
pub fn ngram_profile(text: &str, n: usize) -> SparseVector {
    let n = n.max(1);
    let chars: Vec<char> = normalize(text).chars().collect();
    let mut profile = SparseVector::new();
    if chars.is_empty() {
        return profile;
    }
    if chars.len() < n {
        profile.insert(chars.iter().collect(), 1.0);
        return profile;
    }
    for window in chars.windows(n) {
        *profile.entry(window.iter().collect()).or_default() += 1.0;
    }
    profile
}

/// Cosine similarity clamped to `[0, 1]`; 0 when either side is empty.
pub fn cosine(a: &SparseVector, b: &SparseVector) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small.iter().filter_map(|(k, x)| large.get(k).map(|y| x * y)).sum();
    // one square root of the product keeps identical count vectors at exactly 1
    let na = a.values().map(|x| x * x).sum::<f64>();
    let nb = b.values().map(|x| x * x).sum::<f64>();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb).sqrt()).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vector(pairs: &[(&str, f64)]) -> SparseVector {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn bigram_counts() {
        assert_eq!(ngram_profile("abab", 2), vector(&[("ab", 2.0), ("ba", 1.0)]));
    }

    #[test]
    fn short_and_empty_text() {
        assert_eq!(ngram_profile("あ", 3), vector(&[("あ", 1.0)]));
        assert!(ngram_profile("", 3).is_empty());
        assert!(ngram_profile("  \t", 2).is_empty());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize("  ＡＢＣ\u{3000}  def "), "abc def");
        assert_eq!(ngram_profile("AB  ab", 2), ngram_profile("ab ab", 2));
    }

    #[test]
    fn cosine_examples() {
        let a = ngram_profile("abc", 2);
        assert_eq!(cosine(&a, &a), 1.0);
        assert_eq!(cosine(&a, &ngram_profile("xyz", 2)), 0.0);
        assert!((cosine(&a, &ngram_profile("abd", 2)) - 0.5).abs() < 1e-12);
        assert_eq!(cosine(&a, &SparseVector::new()), 0.0);
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_bounded(x in "[a-dあい ]{0,20}", y in "[a-dあい ]{0,20}", n in 1usize..4) {
            let (a, b) = (ngram_profile(&x, n), ngram_profile(&y, n));
            let ab = cosine(&a, &b);
            prop_assert!((ab - cosine(&b, &a)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
        }
    }
}
