//! Hand-crafted per-window account statistics and the ablation comparison
//! that measures what they add on top of text embeddings.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;
use url::Url;

use crate::corpus::Tweet;
use crate::embed::tokenize;
use crate::eval::MetricsReport;
use crate::tablefile::{read_rows, TableFileError};
use crate::textlab::median;

pub const FEATURE_NAMES: [&str; 19] = [
    "n_tweets",
    "n_retweets",
    "n_replies",
    "n_quotes",
    "share_retweets",
    "share_replies",
    "share_quotes",
    "median_favorites",
    "median_retweets",
    "median_replies",
    "median_quotes",
    "active_days",
    "verified",
    "mean_sentiment",
    "antivax_retweet_count",
    "antivax_retweet_share",
    "url_conspiracy_count",
    "url_questionable_count",
    "url_proscience_count",
];

/// Deltas larger than this in absolute value count as non-negligible.
pub const ABLATION_TOLERANCE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error(transparent)]
    File(#[from] TableFileError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("ablation compares slice {with:?} against {without:?}")]
    SliceMismatch { with: String, without: String },
    #[error("standardizer needs at least one row")]
    NoRows,
    #[error("feature row has {found} values, expected {expected}")]
    Width { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DomainCategory {
    ConspiracyPseudoscience,
    Questionable,
    ProScience,
}

impl DomainCategory {
    /// Accepts the usual spellings: `conspiracy_pseudoscience`,
    /// `Conspiracy-Pseudoscience`, `questionable sources`, `pro-science`.
    pub fn parse(s: &str) -> Option<DomainCategory> {
        let key: String = s
            .chars()
            .filter(char::is_ascii_alphanumeric)
            .collect::<String>()
            .to_lowercase();
        match key.as_str() {
            "conspiracypseudoscience" | "conspiracy" | "pseudoscience" => Some(DomainCategory::ConspiracyPseudoscience),
            "questionable" | "questionablesources" | "questionablesource" => Some(DomainCategory::Questionable),
            "proscience" => Some(DomainCategory::ProScience),
            _ => None,
        }
    }
}

/// Lowercase hostname to rating. Lookups match the host or any parent domain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DomainRatingTable {
    ratings: HashMap<String, DomainCategory>,
}

impl DomainRatingTable {
    pub fn new() -> DomainRatingTable {
        DomainRatingTable::default()
    }

    /// Later entries for the same host replace earlier ones.
    pub fn insert(&mut self, hostname: &str, category: DomainCategory) {
        let host = hostname.trim().trim_end_matches('.').to_lowercase();
        let host = host.strip_prefix("www.").map(str::to_string).unwrap_or(host);
        self.ratings.insert(host, category);
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    /// `news.example.org` matches an entry for `example.org`; `badexample.org`
    /// does not.
    pub fn lookup_host(&self, host: &str) -> Option<DomainCategory> {
        let host = host.trim_end_matches('.').to_lowercase();
        let mut rest = host.as_str();
        loop {
            if let Some(&c) = self.ratings.get(rest) {
                return Some(c);
            }
            rest = rest.split_once('.')?.1;
        }
    }

    pub fn lookup_url(&self, raw: &str) -> Option<DomainCategory> {
        let parsed = Url::parse(raw).or_else(|_| Url::parse(&format!("http://{raw}"))).ok()?;
        self.lookup_host(parsed.host_str()?)
    }
}

pub fn load_domain_ratings(path: &Path) -> Result<DomainRatingTable, FeatureError> {
    let mut table = DomainRatingTable::new();
    for row in read_rows(path, 2, &["hostname", "category"])? {
        let c = DomainCategory::parse(&row.cells[1]).ok_or_else(|| {
            TableFileError::format(path, row.line, format!("unknown rating category {:?}", row.cells[1]))
        })?;
        table.insert(&row.cells[0], c);
    }
    Ok(table)
}

/// Token to valence in [-1, 1].
pub fn load_valence_lexicon(path: &Path) -> Result<HashMap<String, f64>, FeatureError> {
    let mut lex = HashMap::new();
    for row in read_rows(path, 2, &["token", "score"])? {
        let score: f64 = row.cells[1]
            .parse()
            .ok()
            .filter(|v: &f64| (-1.0..=1.0).contains(v))
            .ok_or_else(|| {
                TableFileError::format(path, row.line, format!("valence {:?} not in [-1, 1]", row.cells[1]))
            })?;
        let token = tokenize(&row.cells[0])
            .into_iter()
            .next()
            .unwrap_or_else(|| row.cells[0].to_lowercase());
        lex.insert(token, score);
    }
    Ok(lex)
}

/// One account id per line; blank lines and `#` comments skipped.
pub fn load_antivax_accounts(path: &Path) -> Result<HashSet<String>, FeatureError> {
    let text = fs::read_to_string(path).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EngineeredFeatures {
    pub n_tweets: u64,
    pub n_retweets: u64,
    pub n_replies: u64,
    pub n_quotes: u64,
    pub share_retweets: f64,
    pub share_replies: f64,
    pub share_quotes: f64,
    pub median_favorites: f64,
    pub median_retweets: f64,
    pub median_replies: f64,
    pub median_quotes: f64,
    pub active_days: u64,
    pub verified: u8,
    pub mean_sentiment: f64,
    pub antivax_retweet_count: u64,
    pub antivax_retweet_share: f64,
    pub url_conspiracy_count: u64,
    pub url_questionable_count: u64,
    pub url_proscience_count: u64,
}

impl EngineeredFeatures {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.n_tweets as f64,
            self.n_retweets as f64,
            self.n_replies as f64,
            self.n_quotes as f64,
            self.share_retweets,
            self.share_replies,
            self.share_quotes,
            self.median_favorites,
            self.median_retweets,
            self.median_replies,
            self.median_quotes,
            self.active_days as f64,
            self.verified as f64,
            self.mean_sentiment,
            self.antivax_retweet_count as f64,
            self.antivax_retweet_share,
            self.url_conspiracy_count as f64,
            self.url_questionable_count as f64,
            self.url_proscience_count as f64,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Plain,
    Retweet,
    Reply,
    Quote,
}

// A quote-retweet counts once, as a quote; a retweeted reply as a retweet.
fn kind(t: &Tweet) -> Kind {
    if t.is_quote {
        Kind::Quote
    } else if t.is_retweet {
        Kind::Retweet
    } else if t.is_reply {
        Kind::Reply
    } else {
        Kind::Plain
    }
}

/// Matched valence sum over token count; 0 for a tweet without tokens.
fn tweet_sentiment(text: &str, valence: &HashMap<String, f64>) -> f64 {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return 0.0;
    }
    let sum: f64 = tokens.iter().filter_map(|t| valence.get(t)).sum();
    sum / tokens.len() as f64
}

fn median_of(tweets: &[&Tweet], f: impl Fn(&Tweet) -> u64) -> f64 {
    median(&tweets.iter().map(|t| f(t) as f64).collect::<Vec<_>>()).unwrap_or(0.0)
}

/// Statistics of one account's tweets inside one window. Shares are over all
/// tweets in the window; an empty window gives zeros plus the verified flag.
pub fn extract_features(
    tweets: &[&Tweet],
    verified: bool,
    valence: &HashMap<String, f64>,
    antivax_accounts: &HashSet<String>,
    ratings: &DomainRatingTable,
) -> EngineeredFeatures {
    let mut f = EngineeredFeatures {
        verified: verified as u8,
        ..EngineeredFeatures::default()
    };
    if tweets.is_empty() {
        return f;
    }
    let n = tweets.len() as f64;
    f.n_tweets = tweets.len() as u64;
    let mut days = BTreeSet::new();
    let mut sentiment = 0.0;
    for t in tweets {
        match kind(t) {
            Kind::Retweet => f.n_retweets += 1,
            Kind::Reply => f.n_replies += 1,
            Kind::Quote => f.n_quotes += 1,
            Kind::Plain => {}
        }
        if t.is_retweet
            && t.retweeted_account_id
                .as_ref()
                .is_some_and(|a| antivax_accounts.contains(a))
        {
            f.antivax_retweet_count += 1;
        }
        for u in &t.urls {
            match ratings.lookup_url(u) {
                Some(DomainCategory::ConspiracyPseudoscience) => f.url_conspiracy_count += 1,
                Some(DomainCategory::Questionable) => f.url_questionable_count += 1,
                Some(DomainCategory::ProScience) => f.url_proscience_count += 1,
                None => {}
            }
        }
        days.insert(t.created_at.day_number());
        sentiment += tweet_sentiment(&t.text, valence);
    }
    f.share_retweets = f.n_retweets as f64 / n;
    f.share_replies = f.n_replies as f64 / n;
    f.share_quotes = f.n_quotes as f64 / n;
    f.antivax_retweet_share = f.antivax_retweet_count as f64 / n;
    f.median_favorites = median_of(tweets, |t| t.favorites);
    f.median_retweets = median_of(tweets, |t| t.retweets);
    f.median_replies = median_of(tweets, |t| t.replies);
    f.median_quotes = median_of(tweets, |t| t.quotes);
    f.active_days = days.len() as u64;
    f.mean_sentiment = (sentiment / n).clamp(-1.0, 1.0);
    f
}

/// Per-column zero mean, unit variance, fitted on training rows. Constant
/// columns are centred only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Standardizer, FeatureError> {
        let width = rows.first().ok_or(FeatureError::NoRows)?.len();
        if let Some(r) = rows.iter().find(|r| r.len() != width) {
            return Err(FeatureError::Width {
                expected: width,
                found: r.len(),
            });
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..width).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..width)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if row.len() != self.mean.len() {
            return Err(FeatureError::Width {
                expected: self.mean.len(),
                found: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub metric: &'static str,
    pub with_features: Option<f64>,
    pub without_features: Option<f64>,
    /// with minus without
    pub delta: Option<f64>,
    pub non_negligible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub slice_id: String,
    pub rows: Vec<AblationRow>,
    pub negligible: bool,
}

impl AblationReport {
    pub fn verdict(&self) -> &'static str {
        if self.negligible {
            "negligible"
        } else {
            "non-negligible"
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("slice: {}\n", self.slice_id);
        writeln!(
            out,
            "{:<10}  {:>13}  {:>16}  {:>9}  flag",
            "metric", "with_features", "without_features", "delta"
        )
        .unwrap();
        let cell = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"));
        for r in &self.rows {
            writeln!(
                out,
                "{:<10}  {:>13}  {:>16}  {:>9}  {}",
                r.metric,
                cell(r.with_features),
                cell(r.without_features),
                r.delta.map_or_else(|| "NA".to_string(), |d| format!("{d:+.4}")),
                if r.non_negligible { "*" } else { "" }
            )
            .unwrap();
        }
        writeln!(out, "verdict: {}", self.verdict()).unwrap();
        out
    }

    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
        let mut out = String::from("metric,with_features,without_features,delta,non_negligible\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.metric,
                cell(r.with_features),
                cell(r.without_features),
                cell(r.delta),
                r.non_negligible
            )
            .unwrap();
        }
        out
    }
}

/// Side-by-side accuracy, F1, ROC-AUC and PRC-AUC of two runs on one slice.
pub fn ablation_report(with: &MetricsReport, without: &MetricsReport) -> Result<AblationReport, FeatureError> {
    if with.slice_id != without.slice_id {
        return Err(FeatureError::SliceMismatch {
            with: with.slice_id.clone(),
            without: without.slice_id.clone(),
        });
    }
    let pairs = [
        ("accuracy", with.accuracy, without.accuracy),
        ("f1", with.f1, without.f1),
        ("roc_auc", with.roc_auc, without.roc_auc),
        ("prc_auc", with.prc_auc, without.prc_auc),
    ];
    let rows: Vec<AblationRow> = pairs
        .into_iter()
        .map(|(metric, a, b)| {
            let delta = a.zip(b).map(|(a, b)| a - b);
            AblationRow {
                metric,
                with_features: a,
                without_features: b,
                delta,
                non_negligible: delta.is_some_and(|d| d.abs() > ABLATION_TOLERANCE),
            }
        })
        .collect();
    Ok(AblationReport {
        slice_id: with.slice_id.clone(),
        negligible: rows.iter().all(|r| !r.non_negligible),
        rows,
    })
}
