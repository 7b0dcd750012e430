//! Token-level text similarity shared by both memories.

use std::collections::{BTreeMap, BTreeSet};

/// Lowercase, strip punctuation, collapse whitespace, split into tokens.
///
/// The result keeps duplicates and order, so it doubles as a multiset.
pub fn normalize_text(text: &str) -> Vec<String> {
    let cleaned: String = text.chars().flat_map(char::to_lowercase).filter(|c| c.is_alphanumeric() || c.is_whitespace()).collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

/// Canonical single-space form of [`normalize_text`].
pub fn canonical_text(text: &str) -> String {
    normalize_text(text).join(" ")
}

pub fn token_set<S: AsRef<str>>(tokens: &[S]) -> BTreeSet<&str> {
    tokens.iter().map(AsRef::as_ref).collect()
}

fn frequencies<S: AsRef<str>>(tokens: &[S]) -> BTreeMap<&str, f64> {
    let mut freq = BTreeMap::new();
    for t in tokens {
        *freq.entry(t.as_ref()).or_insert(0.0) += 1.0;
    }
    freq
}

/// `|a ∩ b| / |a ∪ b|`, zero when both sets are empty.
pub fn jaccard<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    let (a, b) = (token_set(a), token_set(b));
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Cosine of token-frequency vectors, zero when either side is empty.
pub fn token_cosine<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (fa, fb) = (frequencies(a), frequencies(b));
    let dot: f64 = fa.iter().filter_map(|(t, x)| fb.get(t).map(|y| x * y)).sum();
    let na = fa.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = fb.values().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(0.0, 1.0)
}
