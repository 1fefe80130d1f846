use std::collections::BTreeMap;

use serde::Serialize;

use super::TextlabError;
use crate::embed::tokenize;

pub const DEFAULT_SMOOTHING: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenFrequency {
    pub token: String,
    pub count_class0: u64,
    pub count_class1: u64,
    /// Per million tokens of the class corpus.
    pub rate_class0: f64,
    pub rate_class1: f64,
    /// `ln((rate_class1 + s) / (rate_class0 + s))`
    pub skew: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyComparison {
    pub total_tokens_class0: u64,
    pub total_tokens_class1: u64,
    pub smoothing: f64,
    /// Alphabetical.
    pub tokens: Vec<TokenFrequency>,
}

impl FrequencyComparison {
    /// Largest |skew| first; ties broken by token.
    pub fn by_skew(&self) -> Vec<&TokenFrequency> {
        let mut v: Vec<&TokenFrequency> = self.tokens.iter().collect();
        v.sort_by(|a, b| {
            b.skew
                .abs()
                .total_cmp(&a.skew.abs())
                .then_with(|| a.token.cmp(&b.token))
        });
        v
    }

    /// Largest `max(rate_class0, rate_class1)` first; ties broken by token.
    pub fn by_rate(&self) -> Vec<&TokenFrequency> {
        let mut v: Vec<&TokenFrequency> = self.tokens.iter().collect();
        let peak = |t: &TokenFrequency| t.rate_class0.max(t.rate_class1);
        v.sort_by(|a, b| peak(b).total_cmp(&peak(a)).then_with(|| a.token.cmp(&b.token)));
        v
    }

    pub fn get(&self, token: &str) -> Option<&TokenFrequency> {
        self.tokens
            .binary_search_by(|t| t.token.as_str().cmp(token))
            .ok()
            .map(|i| &self.tokens[i])
    }
}

fn count_tokens<S: AsRef<str>>(docs: &[S]) -> (BTreeMap<String, u64>, u64) {
    let mut counts = BTreeMap::new();
    let mut total = 0;
    for doc in docs {
        for token in tokenize(doc.as_ref()) {
            *counts.entry(token).or_insert(0) += 1;
            total += 1;
        }
    }
    (counts, total)
}

/// Class-conditional token rates. A token is kept when it reaches `min_count`
/// in at least one class.
pub fn frequency_compare<S: AsRef<str>>(
    docs_class0: &[S],
    docs_class1: &[S],
    min_count: u64,
    smoothing: f64,
) -> Result<FrequencyComparison, TextlabError> {
    if !(smoothing > 0.0 && smoothing.is_finite()) {
        return Err(TextlabError::BadParameter(format!(
            "smoothing must be positive, got {smoothing}"
        )));
    }
    let (c0, n0) = count_tokens(docs_class0);
    let (c1, n1) = count_tokens(docs_class1);
    if n0 == 0 {
        return Err(TextlabError::EmptyCorpus("class 0"));
    }
    if n1 == 0 {
        return Err(TextlabError::EmptyCorpus("class 1"));
    }
    let mut merged: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for (t, &c) in &c0 {
        merged.entry(t).or_default().0 = c;
    }
    for (t, &c) in &c1 {
        merged.entry(t).or_default().1 = c;
    }
    let tokens = merged
        .into_iter()
        .filter(|(_, (a, b))| *a >= min_count || *b >= min_count)
        .map(|(token, (a, b))| {
            let rate_class0 = a as f64 * 1e6 / n0 as f64;
            let rate_class1 = b as f64 * 1e6 / n1 as f64;
            TokenFrequency {
                token: token.to_string(),
                count_class0: a,
                count_class1: b,
                rate_class0,
                rate_class1,
                skew: ((rate_class1 + smoothing) / (rate_class0 + smoothing)).ln(),
            }
        })
        .collect();
    Ok(FrequencyComparison {
        total_tokens_class0: n0,
        total_tokens_class1: n1,
        smoothing,
        tokens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(token: &str, hits: usize, filler: &str, total: usize) -> Vec<String> {
        let mut words = vec![token; hits];
        words.extend(std::iter::repeat_n(filler, total - hits));
        vec![words.join(" ")]
    }

    #[test]
    fn equal_rates_give_zero_skew() {
        let a = corpus("vaccine", 10, "the", 1000);
        let b = corpus("vaccine", 10, "a", 1000);
        let f = frequency_compare(&a, &b, 1, 1.0).unwrap();
        let t = f.get("vaccine").unwrap();
        assert_eq!(t.rate_class0, 10_000.0);
        assert_eq!(t.skew, 0.0);
    }

    #[test]
    fn class1_only_token() {
        let a = corpus("x", 0, "the", 100);
        let b = corpus("fraud", 5, "the", 100);
        let f = frequency_compare(&a, &b, 1, 1.0).unwrap();
        let t = f.get("fraud").unwrap();
        assert_eq!(t.count_class0, 0);
        assert!((t.skew - (50_001.0f64).ln()).abs() < 1e-12);
        assert_eq!(f.by_skew()[0].token, "fraud");
        assert_eq!(f.by_rate()[0].token, "the");
    }

    #[test]
    fn swap_negates_skew_and_min_count_filters() {
        let a = vec!["a a b c".to_string(), "a d".to_string()];
        let b = vec!["b b b c e".to_string()];
        let f = frequency_compare(&a, &b, 1, 1.0).unwrap();
        let g = frequency_compare(&b, &a, 1, 1.0).unwrap();
        for t in &f.tokens {
            assert!((t.skew + g.get(&t.token).unwrap().skew).abs() < 1e-12);
        }
        let f2 = frequency_compare(&a, &b, 2, 1.0).unwrap();
        let kept: Vec<&str> = f2.tokens.iter().map(|t| t.token.as_str()).collect();
        assert_eq!(kept, vec!["a", "b"]);
    }

    #[test]
    fn empty_corpus_is_fatal() {
        let empty: Vec<String> = vec![];
        assert!(frequency_compare(&empty, &["a".to_string()], 1, 1.0).is_err());
        assert!(frequency_compare(&["a"], &["  "], 1, 1.0).is_err());
    }
}
