//! Tweet corpus ingestion, labeling dates, 90-day window slicing and
//! account-level dataset splits.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::artifact::ArtifactHeader;
use crate::embed::tokenize;

pub const SECONDS_PER_DAY: i64 = 86_400;
pub const WINDOW_LENGTH_DAYS: i64 = 90;
pub const WINDOW_STARTS: [i64; 7] = [0, 60, 120, 180, 240, 300, 360];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("account {account_id} rejected: {reason}")]
    AccountRejected { account_id: String, reason: String },
    #[error("account {0} has no labeling date")]
    MissingLabelingDate(String),
    #[error("need at least 3 accounts to split, got {0}")]
    TooFewAccounts(usize),
    #[error("invalid window [{0}-{1})")]
    InvalidWindow(i64, i64),
}

/// Seconds since the Unix epoch, UTC. Serialized as an RFC 3339 string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

impl Timestamp {
    /// Accepts RFC 3339 (any offset, optional fraction), naive
    /// `YYYY-MM-DDTHH:MM:SS` / `YYYY-MM-DD HH:MM:SS` read as UTC, and bare dates.
    pub fn parse(s: &str) -> Option<Timestamp> {
        let s = s.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Some(Timestamp(dt.timestamp()));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
            if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
                return Some(Timestamp(dt.and_utc().timestamp()));
            }
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .ok()
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .map(|dt| Timestamp(dt.and_utc().timestamp()))
    }

    pub fn to_rfc3339(self) -> String {
        DateTime::<Utc>::from_timestamp(self.0, 0)
            .map(|dt| dt.to_rfc3339_opts(SecondsFormat::Secs, true))
            .unwrap_or_else(|| self.0.to_string())
    }

    /// UTC calendar day index.
    pub fn day_number(self) -> i64 {
        self.0.div_euclid(SECONDS_PER_DAY)
    }

    pub fn plus_days(self, days: i64) -> Timestamp {
        Timestamp(self.0 + days * SECONDS_PER_DAY)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_rfc3339())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Timestamp::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid timestamp {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    NotAnti,
    Anti,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::NotAnti => 0,
            Label::Anti => 1,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::NotAnti => Label::Anti,
            Label::Anti => Label::NotAnti,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Label::NotAnti),
            1 => Ok(Label::Anti),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.as_u8()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tweet {
    pub tweet_id: String,
    pub account_id: String,
    pub created_at: Timestamp,
    pub text: String,
    #[serde(default)]
    pub is_retweet: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweeted_account_id: Option<String>,
    #[serde(default)]
    pub favorites: u64,
    #[serde(default)]
    pub retweets: u64,
    #[serde(default)]
    pub replies: u64,
    #[serde(default)]
    pub quotes: u64,
    #[serde(default)]
    pub urls: Vec<String>,
    #[serde(default)]
    pub is_quote: bool,
    #[serde(default)]
    pub is_reply: bool,
}

impl Tweet {
    /// Plain tweet with zeroed metadata.
    pub fn new(tweet_id: &str, account_id: &str, created_at: Timestamp, text: &str) -> Tweet {
        Tweet {
            tweet_id: tweet_id.to_string(),
            account_id: account_id.to_string(),
            created_at,
            text: text.to_string(),
            is_retweet: false,
            retweeted_account_id: None,
            favorites: 0,
            retweets: 0,
            replies: 0,
            quotes: 0,
            urls: Vec::new(),
            is_quote: false,
            is_reply: false,
        }
    }
}

// Same shape as Tweet but with the timestamp left unparsed, so bad dates can
// be told apart from malformed lines.
#[derive(Deserialize)]
struct RawTweet {
    tweet_id: String,
    account_id: String,
    created_at: String,
    text: String,
    #[serde(default)]
    is_retweet: bool,
    #[serde(default)]
    retweeted_account_id: Option<String>,
    #[serde(default)]
    favorites: u64,
    #[serde(default)]
    retweets: u64,
    #[serde(default)]
    replies: u64,
    #[serde(default)]
    quotes: u64,
    #[serde(default)]
    urls: Vec<String>,
    #[serde(default)]
    is_quote: bool,
    #[serde(default)]
    is_reply: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccountRecord {
    pub account_id: String,
    pub label: Label,
    pub verified: bool,
    /// Ascending by `created_at`, ties by `tweet_id`.
    pub tweets: Vec<Tweet>,
    /// Override from the labels file; takes precedence over computation.
    pub explicit_labeling_date: Option<Timestamp>,
    pub labeling_date: Option<Timestamp>,
}

impl AccountRecord {
    pub fn new(account_id: &str, label: Label, mut tweets: Vec<Tweet>) -> AccountRecord {
        sort_tweets(&mut tweets);
        AccountRecord {
            account_id: account_id.to_string(),
            label,
            verified: false,
            tweets,
            explicit_labeling_date: None,
            labeling_date: None,
        }
    }
}

pub fn sort_tweets(tweets: &mut [Tweet]) {
    tweets.sort_by(|a, b| {
        a.created_at
            .cmp(&b.created_at)
            .then_with(|| a.tweet_id.cmp(&b.tweet_id))
    });
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineWarning {
    pub path: PathBuf,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.path.display(), self.line, self.message)
    }
}

#[derive(Debug, Default)]
pub struct TweetFile {
    /// Keyed by account id; each list sorted.
    pub by_account: BTreeMap<String, Vec<Tweet>>,
    pub warnings: Vec<LineWarning>,
    pub bad_timestamps: usize,
    pub malformed_lines: usize,
}

/// Reads a line-delimited tweet file. Bad lines are warned about and skipped.
pub fn read_tweets(path: &Path) -> Result<TweetFile, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = TweetFile::default();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut warn = |message: String| {
            log::warn!("{}:{}: {}", path.display(), line_no, message);
            out.warnings.push(LineWarning {
                path: path.to_path_buf(),
                line: line_no,
                message,
            });
        };
        let raw: RawTweet = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(e) => {
                warn(format!("malformed record: {e}"));
                out.malformed_lines += 1;
                continue;
            }
        };
        let Some(created_at) = Timestamp::parse(&raw.created_at) else {
            warn(format!("unparsable created_at {:?}", raw.created_at));
            out.bad_timestamps += 1;
            continue;
        };
        if raw.is_retweet != raw.retweeted_account_id.is_some() {
            warn("retweeted_account_id must be present iff is_retweet".to_string());
            out.malformed_lines += 1;
            continue;
        }
        let tweet = Tweet {
            tweet_id: raw.tweet_id,
            account_id: raw.account_id,
            created_at,
            text: raw.text,
            is_retweet: raw.is_retweet,
            retweeted_account_id: raw.retweeted_account_id,
            favorites: raw.favorites,
            retweets: raw.retweets,
            replies: raw.replies,
            quotes: raw.quotes,
            urls: raw.urls,
            is_quote: raw.is_quote,
            is_reply: raw.is_reply,
        };
        out.by_account.entry(tweet.account_id.clone()).or_default().push(tweet);
    }
    for tweets in out.by_account.values_mut() {
        sort_tweets(tweets);
    }
    Ok(out)
}

pub fn write_tweets(path: &Path, tweets: &[Tweet]) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for t in tweets {
        let line = serde_json::to_string(t).expect("tweet serializes");
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelEntry {
    pub account_id: String,
    pub label: Label,
    pub labeling_date: Option<Timestamp>,
    pub verified: bool,
}

/// Reads `account_id,label[,labeling_date]` with a required header row. An
/// optional `verified` column is honoured when present.
pub fn read_labels(path: &Path) -> Result<(Vec<LabelEntry>, Vec<LineWarning>), CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    let format_err = |message: String| CorpusError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| format_err(format!("unreadable header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let id_col = col("account_id").ok_or_else(|| format_err("missing account_id column".into()))?;
    let label_col = col("label").ok_or_else(|| format_err("missing label column".into()))?;
    let date_col = col("labeling_date");
    let verified_col = col("verified");

    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    for result in reader.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                warnings.push(LineWarning {
                    path: path.to_path_buf(),
                    line,
                    message: format!("malformed row: {e}"),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut warn = |message: String| {
            log::warn!("{}:{}: {}", path.display(), line, message);
            warnings.push(LineWarning {
                path: path.to_path_buf(),
                line,
                message,
            });
        };
        let account_id = record.get(id_col).unwrap_or("").to_string();
        if account_id.is_empty() {
            warn("empty account_id".into());
            continue;
        }
        let label = match record.get(label_col).map(str::parse::<u8>) {
            Some(Ok(v)) => match Label::try_from(v) {
                Ok(l) => l,
                Err(msg) => {
                    warn(msg);
                    continue;
                }
            },
            _ => {
                warn("label must be 0 or 1".into());
                continue;
            }
        };
        let labeling_date = match date_col.and_then(|c| record.get(c)).filter(|s| !s.is_empty()) {
            None => None,
            Some(s) => match Timestamp::parse(s) {
                Some(ts) => Some(ts),
                None => {
                    warn(format!("unparsable labeling_date {s:?}"));
                    continue;
                }
            },
        };
        let verified = verified_col
            .and_then(|c| record.get(c))
            .map(|s| matches!(s.to_ascii_lowercase().as_str(), "1" | "true" | "yes"))
            .unwrap_or(false);
        if !seen.insert(account_id.clone()) {
            warn(format!("duplicate account {account_id}; first row kept"));
            continue;
        }
        entries.push(LabelEntry {
            account_id,
            label,
            labeling_date,
            verified,
        });
    }
    Ok((entries, warnings))
}

pub fn write_labels(path: &Path, entries: &[LabelEntry]) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "account_id,label,labeling_date,verified").map_err(io_err)?;
    for e in entries {
        let date = e.labeling_date.map(Timestamp::to_rfc3339).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{}",
            e.account_id,
            e.label.as_u8(),
            date,
            u8::from(e.verified)
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[derive(Debug, Default)]
pub struct IngestReport {
    /// Sorted by account id.
    pub accounts: Vec<AccountRecord>,
    pub warnings: Vec<LineWarning>,
    pub bad_timestamps: usize,
    pub malformed_lines: usize,
    /// Accounts present in the tweets file but absent from the labels file.
    pub unlabeled_accounts: usize,
    /// Labeled accounts without any usable tweet.
    pub labels_without_tweets: Vec<String>,
}

pub fn ingest_corpus(tweets_path: &Path, labels_path: &Path) -> Result<IngestReport, CorpusError> {
    let tweets = read_tweets(tweets_path)?;
    let (labels, label_warnings) = read_labels(labels_path)?;
    Ok(join_labels(tweets, labels, label_warnings))
}

pub fn join_labels(mut tweets: TweetFile, labels: Vec<LabelEntry>, label_warnings: Vec<LineWarning>) -> IngestReport {
    let mut report = IngestReport {
        warnings: tweets.warnings,
        bad_timestamps: tweets.bad_timestamps,
        malformed_lines: tweets.malformed_lines,
        ..Default::default()
    };
    report.warnings.extend(label_warnings);
    let labeled: HashSet<&str> = labels.iter().map(|e| e.account_id.as_str()).collect();
    report.unlabeled_accounts = tweets
        .by_account
        .keys()
        .filter(|id| !labeled.contains(id.as_str()))
        .count();
    if report.unlabeled_accounts > 0 {
        log::warn!(
            "{} account(s) in the tweets file have no label and were skipped",
            report.unlabeled_accounts
        );
    }
    for entry in labels {
        match tweets.by_account.remove(&entry.account_id) {
            Some(list) if !list.is_empty() => report.accounts.push(AccountRecord {
                account_id: entry.account_id,
                label: entry.label,
                verified: entry.verified,
                tweets: list,
                explicit_labeling_date: entry.labeling_date,
                labeling_date: None,
            }),
            _ => {
                log::warn!("labeled account {} has no tweets; skipped", entry.account_id);
                report.labels_without_tweets.push(entry.account_id);
            }
        }
    }
    report.accounts.sort_by(|a, b| a.account_id.cmp(&b.account_id));
    report
}

/// True when any token of `text` equals a trigger term, or is the hashtag form
/// of a bare keyword trigger.
pub fn contains_trigger(text: &str, trigger_terms: &HashSet<String>) -> bool {
    tokenize(text).iter().any(|tok| {
        trigger_terms.contains(tok)
            || tok
                .strip_prefix('#')
                .is_some_and(|bare| !bare.is_empty() && trigger_terms.contains(bare))
    })
}

/// Class 1: first tweet that uses a trigger term. Class 0: most recent tweet.
/// An explicit date from the labels file wins over both.
pub fn compute_labeling_date(
    record: &AccountRecord,
    trigger_terms: &HashSet<String>,
) -> Result<Timestamp, CorpusError> {
    if let Some(ts) = record.explicit_labeling_date {
        return Ok(ts);
    }
    let reject = |reason: &str| CorpusError::AccountRejected {
        account_id: record.account_id.clone(),
        reason: reason.to_string(),
    };
    match record.label {
        Label::Anti => record
            .tweets
            .iter()
            .filter(|t| contains_trigger(&t.text, trigger_terms))
            .map(|t| t.created_at)
            .min()
            .ok_or_else(|| reject("no tweet contains a trigger term and no explicit labeling date")),
        Label::NotAnti => record
            .tweets
            .iter()
            .map(|t| t.created_at)
            .max()
            .ok_or_else(|| reject("account has no tweets")),
    }
}

#[derive(Debug, Default)]
pub struct LabelingOutcome {
    pub accepted: Vec<AccountRecord>,
    pub rejected: Vec<(String, String)>,
    /// Label-0 accounts whose tweets use trigger terms anyway; label kept.
    pub label0_trigger_hits: Vec<(String, usize)>,
}

pub fn assign_labeling_dates(records: Vec<AccountRecord>, trigger_terms: &HashSet<String>) -> LabelingOutcome {
    let mut out = LabelingOutcome::default();
    for mut record in records {
        if record.label == Label::NotAnti {
            let hits = record
                .tweets
                .iter()
                .filter(|t| contains_trigger(&t.text, trigger_terms))
                .count();
            if hits > 0 {
                log::info!(
                    "label-0 account {} uses trigger terms in {hits} tweet(s); label kept",
                    record.account_id
                );
                out.label0_trigger_hits.push((record.account_id.clone(), hits));
            }
        }
        match compute_labeling_date(&record, trigger_terms) {
            Ok(ts) => {
                record.labeling_date = Some(ts);
                out.accepted.push(record);
            }
            Err(CorpusError::AccountRejected { account_id, reason }) => {
                log::warn!("account {account_id} rejected: {reason}");
                out.rejected.push((account_id, reason));
            }
            Err(other) => unreachable!("unexpected labeling error: {other}"),
        }
    }
    out
}

/// `[start, end)` in whole days before the labeling date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WindowSpec {
    start_days: i64,
    end_days: i64,
}

impl WindowSpec {
    pub fn new(start_days: i64, end_days: i64) -> Result<WindowSpec, CorpusError> {
        if end_days - start_days != WINDOW_LENGTH_DAYS || !WINDOW_STARTS.contains(&start_days) {
            return Err(CorpusError::InvalidWindow(start_days, end_days));
        }
        Ok(WindowSpec { start_days, end_days })
    }

    pub fn all() -> [WindowSpec; 7] {
        WINDOW_STARTS.map(|s| WindowSpec {
            start_days: s,
            end_days: s + WINDOW_LENGTH_DAYS,
        })
    }

    /// The most recent window, used at prediction time.
    pub fn most_recent() -> WindowSpec {
        WindowSpec::all()[0]
    }

    pub fn start_days(self) -> i64 {
        self.start_days
    }

    pub fn end_days(self) -> i64 {
        self.end_days
    }

    pub fn contains_offset(self, offset_days: i64) -> bool {
        (self.start_days..self.end_days).contains(&offset_days)
    }

    pub fn index(self) -> usize {
        WINDOW_STARTS
            .iter()
            .position(|&s| s == self.start_days)
            .expect("validated window")
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}-{})", self.start_days, self.end_days)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub account_id: String,
    pub window: WindowSpec,
    pub document: String,
    pub tweet_count: usize,
    pub label: Label,
}

/// Whole days between a tweet and the labeling date; `None` for tweets at or
/// after the labeling date, which never enter any window.
pub fn day_offset(labeling_date: Timestamp, created_at: Timestamp) -> Option<i64> {
    let diff = labeling_date.0 - created_at.0;
    (diff > 0).then(|| diff.div_euclid(SECONDS_PER_DAY))
}

/// Tweets of one window, chronological.
pub fn window_tweets(tweets: &[Tweet], labeling_date: Timestamp, window: WindowSpec) -> Vec<&Tweet> {
    tweets
        .iter()
        .filter(|t| day_offset(labeling_date, t.created_at).is_some_and(|o| window.contains_offset(o)))
        .collect()
}

/// Builds the window samples for an arbitrary tweet list. `tweets` must be
/// sorted; empty windows are dropped.
pub fn slice_tweets(
    account_id: &str,
    label: Label,
    tweets: &[Tweet],
    labeling_date: Timestamp,
    windows: &[WindowSpec],
) -> Vec<WindowSample> {
    windows
        .iter()
        .filter_map(|&window| {
            let members = window_tweets(tweets, labeling_date, window);
            if members.is_empty() {
                return None;
            }
            let document = members.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join("\n");
            Some(WindowSample {
                account_id: account_id.to_string(),
                window,
                document,
                tweet_count: members.len(),
                label,
            })
        })
        .collect()
}

pub fn slice_windows(record: &AccountRecord) -> Result<Vec<WindowSample>, CorpusError> {
    let labeling_date = record
        .labeling_date
        .ok_or_else(|| CorpusError::MissingLabelingDate(record.account_id.clone()))?;
    Ok(slice_tweets(
        &record.account_id,
        record.label,
        &record.tweets,
        labeling_date,
        &WindowSpec::all(),
    ))
}

#[derive(Serialize, Deserialize)]
struct SampleLine {
    account_id: String,
    window_start: i64,
    window_end: i64,
    label: Label,
    tweet_count: usize,
    document: String,
}

pub fn write_samples(path: &Path, header: &ArtifactHeader, samples: &[WindowSample]) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "{}", header.json_line()).map_err(io_err)?;
    for s in samples {
        let line = SampleLine {
            account_id: s.account_id.clone(),
            window_start: s.window.start_days,
            window_end: s.window.end_days,
            label: s.label,
            tweet_count: s.tweet_count,
            document: s.document.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&line).expect("sample serializes")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads a samples file. Unlike tweet ingestion this is strict: the file is
/// produced by this crate, so any bad line is an error.
pub fn read_samples(path: &Path) -> Result<Vec<WindowSample>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() || ArtifactHeader::is_json_header(&line) {
            continue;
        }
        let format_err = |message: String| CorpusError::Format {
            path: path.to_path_buf(),
            message: format!("line {}: {message}", idx + 1),
        };
        let rec: SampleLine = serde_json::from_str(&line).map_err(|e| format_err(e.to_string()))?;
        let window = WindowSpec::new(rec.window_start, rec.window_end).map_err(|e| format_err(e.to_string()))?;
        if rec.tweet_count == 0 || rec.document.is_empty() {
            return Err(format_err("empty window sample".into()));
        }
        out.push(WindowSample {
            account_id: rec.account_id,
            window,
            document: rec.document,
            tweet_count: rec.tweet_count,
            label: rec.label,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitPart {
    Train,
    Validation,
    Test,
}

impl SplitPart {
    pub fn name(self) -> &'static str {
        match self {
            SplitPart::Train => "train",
            SplitPart::Validation => "validation",
            SplitPart::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<SplitPart> {
        match s {
            "train" => Some(SplitPart::Train),
            "validation" => Some(SplitPart::Validation),
            "test" => Some(SplitPart::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: BTreeSet<String>,
    pub validation: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

impl DatasetSplit {
    pub fn part_of(&self, account_id: &str) -> Option<SplitPart> {
        if self.train.contains(account_id) {
            Some(SplitPart::Train)
        } else if self.validation.contains(account_id) {
            Some(SplitPart::Validation)
        } else if self.test.contains(account_id) {
            Some(SplitPart::Test)
        } else {
            None
        }
    }

    pub fn part(&self, part: SplitPart) -> &BTreeSet<String> {
        match part {
            SplitPart::Train => &self.train,
            SplitPart::Validation => &self.validation,
            SplitPart::Test => &self.test,
        }
    }

    fn part_mut(&mut self, part: SplitPart) -> &mut BTreeSet<String> {
        match part {
            SplitPart::Train => &mut self.train,
            SplitPart::Validation => &mut self.validation,
            SplitPart::Test => &mut self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Size of the validation and test parts for `n` accounts: 15% each, rounded
/// down but never below one account.
pub fn holdout_size(n: usize) -> usize {
    ((n as f64 * 0.15).floor() as usize).max(1)
}

/// Splits `total` across groups proportionally (largest remainder, ties to
/// the earlier group).
fn apportion(total: usize, sizes: &[usize]) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return vec![0; sizes.len()];
    }
    let exact: Vec<f64> = sizes.iter().map(|&s| total as f64 * s as f64 / n as f64).collect();
    let mut alloc: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = total - alloc.iter().sum::<usize>();
    for &i in order.iter().cycle().take(sizes.len() * 2) {
        if remaining == 0 {
            break;
        }
        if alloc[i] < sizes[i] {
            alloc[i] += 1;
            remaining -= 1;
        }
    }
    alloc
}

/// Stratified 70/15/15 split by account. Deterministic for a given seed and
/// independent of input order.
pub fn split_accounts<'a, I>(accounts: I, seed: u64) -> Result<DatasetSplit, CorpusError>
where
    I: IntoIterator<Item = (&'a str, Label)>,
{
    let mut by_label: BTreeMap<Label, Vec<&str>> = BTreeMap::new();
    for (id, label) in accounts {
        by_label.entry(label).or_default().push(id);
    }
    let n: usize = by_label.values().map(Vec::len).sum();
    if n < 3 {
        return Err(CorpusError::TooFewAccounts(n));
    }
    let holdout = holdout_size(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<Label> = by_label.keys().copied().collect();
    let sizes: Vec<usize> = labels.iter().map(|l| by_label[l].len()).collect();
    let val_alloc = apportion(holdout, &sizes);
    let rest: Vec<usize> = sizes.iter().zip(&val_alloc).map(|(s, v)| s - v).collect();
    let test_alloc = apportion(holdout, &rest);

    let mut split = DatasetSplit::default();
    for (i, label) in labels.iter().enumerate() {
        let ids = by_label.get_mut(label).expect("label present");
        ids.sort_unstable();
        ids.dedup();
        ids.shuffle(&mut rng);
        for (j, id) in ids.iter().enumerate() {
            let part = if j < val_alloc[i] {
                SplitPart::Validation
            } else if j < val_alloc[i] + test_alloc[i] {
                SplitPart::Test
            } else {
                SplitPart::Train
            };
            split.part_mut(part).insert(id.to_string());
        }
    }
    Ok(split)
}

pub fn write_split(path: &Path, header: &ArtifactHeader, split: &DatasetSplit) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut rows: Vec<(&str, SplitPart)> = [SplitPart::Train, SplitPart::Validation, SplitPart::Test]
        .iter()
        .flat_map(|&p| split.part(p).iter().map(move |id| (id.as_str(), p)))
        .collect();
    rows.sort();
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(w, "{}", header.comment_line()).map_err(io_err)?;
    writeln!(w, "account_id,split").map_err(io_err)?;
    for (id, part) in rows {
        writeln!(w, "{id},{}", part.name()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_split(path: &Path) -> Result<DatasetSplit, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    let format_err = |message: String| CorpusError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut split = DatasetSplit::default();
    for rec in reader.records() {
        let rec = rec.map_err(|e| format_err(e.to_string()))?;
        let (Some(id), Some(part)) = (rec.get(0), rec.get(1).and_then(SplitPart::parse)) else {
            return Err(format_err(format!("bad split row {rec:?}")));
        };
        split.part_mut(part).insert(id.to_string());
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(d: i64) -> Timestamp {
        Timestamp(1_600_000_000).plus_days(d)
    }

    fn triggers(terms: &[&str]) -> HashSet<String> {
        terms.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn timestamp_formats() {
        let a = Timestamp::parse("2021-03-01T12:00:00Z").unwrap();
        assert_eq!(Timestamp::parse("2021-03-01T12:00:00.000Z"), Some(a));
        assert_eq!(Timestamp::parse("2021-03-01T14:00:00+02:00"), Some(a));
        assert_eq!(Timestamp::parse("2021-03-01 12:00:00"), Some(a));
        assert_eq!(Timestamp::parse("2021-03-01"), Some(Timestamp(a.0 - 12 * 3600)));
        assert_eq!(Timestamp::parse("not-a-date"), None);
        assert_eq!(a.to_rfc3339(), "2021-03-01T12:00:00Z");
    }

    fn tweet_line(id: &str, account: &str, date: &str, text: &str) -> String {
        format!(
            r#"{{"tweet_id":"{id}","account_id":"{account}","created_at":"{date}","text":"{text}","is_retweet":false,"favorites":0,"retweets":0,"replies":0,"quotes":0,"urls":[],"is_quote":false,"is_reply":false}}"#
        )
    }

    fn write(dir: &Path, name: &str, lines: &[String]) -> PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        path
    }

    #[test]
    fn ingest_two_accounts_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let mut lines = Vec::new();
        for acc in ["a", "b"] {
            // reverse chronological on disk
            for d in (1..=5).rev() {
                lines.push(tweet_line(
                    &format!("{acc}{d}"),
                    acc,
                    &format!("2021-01-0{d}T00:00:00Z"),
                    "hi",
                ));
            }
        }
        let tweets = write(dir.path(), "t.jsonl", &lines);
        let labels = write(
            dir.path(),
            "l.csv",
            &["account_id,label".into(), "a,1".into(), "b,0".into()],
        );
        let rep = ingest_corpus(&tweets, &labels).unwrap();
        assert_eq!(rep.accounts.len(), 2);
        for acc in &rep.accounts {
            assert_eq!(acc.tweets.len(), 5);
            assert!(acc.tweets.windows(2).all(|w| w[0].created_at <= w[1].created_at));
        }
        assert!(rep.warnings.is_empty());
    }

    #[test]
    fn ingest_label_without_tweets_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let tweets = write(dir.path(), "t.jsonl", &[tweet_line("1", "a", "2021-01-01", "hi")]);
        let labels = write(
            dir.path(),
            "l.csv",
            &["account_id,label".into(), "a,0".into(), "x,1".into()],
        );
        let rep = ingest_corpus(&tweets, &labels).unwrap();
        assert_eq!(rep.accounts.len(), 1);
        assert_eq!(rep.labels_without_tweets, vec!["x".to_string()]);
    }

    #[test]
    fn ingest_bad_timestamp_and_malformed_and_unlabeled() {
        let dir = tempfile::tempdir().unwrap();
        let mut lines: Vec<String> = (0..9)
            .map(|i| tweet_line(&i.to_string(), "a", &format!("2021-01-0{}", i + 1), "x"))
            .collect();
        lines.insert(4, tweet_line("bad", "a", "not-a-date", "x"));
        let tweets = write(dir.path(), "t.jsonl", &lines);
        let labels = write(dir.path(), "l.csv", &["account_id,label".into(), "a,0".into()]);
        let rep = ingest_corpus(&tweets, &labels).unwrap();
        assert_eq!(rep.accounts[0].tweets.len(), 9);
        assert_eq!(rep.bad_timestamps, 1);
        assert_eq!(rep.warnings.len(), 1);
        assert_eq!(rep.warnings[0].line, 5);

        lines.push("{not json".into());
        lines.push(tweet_line("z", "stranger", "2021-01-01", "x"));
        let tweets = write(dir.path(), "t2.jsonl", &lines);
        let rep = ingest_corpus(&tweets, &labels).unwrap();
        assert_eq!(rep.malformed_lines, 1);
        assert_eq!(rep.unlabeled_accounts, 1);
        assert_eq!(rep.warnings.len(), 2);
    }

    #[test]
    fn ingest_missing_file_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let labels = write(dir.path(), "l.csv", &["account_id,label".into()]);
        let err = ingest_corpus(&dir.path().join("nope.jsonl"), &labels).unwrap_err();
        assert!(matches!(err, CorpusError::Open { .. }));
    }

    #[test]
    fn labels_with_explicit_date() {
        let dir = tempfile::tempdir().unwrap();
        let labels = write(
            dir.path(),
            "l.csv",
            &[
                "account_id,label,labeling_date".into(),
                "a,1,2021-05-01".into(),
                "b,0,".into(),
                "c,7,".into(),
            ],
        );
        let (entries, warnings) = read_labels(&labels).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].labeling_date, Timestamp::parse("2021-05-01"));
        assert_eq!(entries[1].labeling_date, None);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn labeling_date_first_trigger_for_class1() {
        let rec = AccountRecord::new(
            "u",
            Label::Anti,
            vec![
                Tweet::new("1", "u", day(10), "hello"),
                Tweet::new("2", "u", day(20), "#novaccine now"),
                Tweet::new("3", "u", day(30), "#novaccine again"),
            ],
        );
        assert_eq!(
            compute_labeling_date(&rec, &triggers(&["#novaccine"])).unwrap(),
            day(20)
        );
    }

    #[test]
    fn labeling_date_latest_for_class0() {
        let rec = AccountRecord::new(
            "u",
            Label::NotAnti,
            vec![
                Tweet::new("1", "u", day(1), "a"),
                Tweet::new("2", "u", day(99), "b"),
                Tweet::new("3", "u", day(50), "c"),
            ],
        );
        assert_eq!(
            compute_labeling_date(&rec, &triggers(&["#novaccine"])).unwrap(),
            day(99)
        );
    }

    #[test]
    fn labeling_date_rejects_untriggered_class1() {
        let rec = AccountRecord::new("u", Label::Anti, vec![Tweet::new("1", "u", day(1), "hello")]);
        let err = compute_labeling_date(&rec, &triggers(&["#novaccine"])).unwrap_err();
        assert!(matches!(err, CorpusError::AccountRejected { .. }));
        let mut rec = rec;
        rec.explicit_labeling_date = Some(day(5));
        assert_eq!(compute_labeling_date(&rec, &triggers(&["#novaccine"])).unwrap(), day(5));
    }

    #[test]
    fn trigger_matching_is_token_based() {
        let t = triggers(&["#novaccine", "plandemic"]);
        assert!(contains_trigger("Say NO: #NoVaccine!", &t));
        assert!(contains_trigger("the #plandemic is", &t));
        assert!(contains_trigger("plandemic.", &t));
        assert!(!contains_trigger("#novaccinepassports", &t));
        assert!(!contains_trigger("plandemics", &t));
    }

    #[test]
    fn label0_trigger_hits_logged_not_rejected() {
        let rec = AccountRecord::new("u", Label::NotAnti, vec![Tweet::new("1", "u", day(1), "#novaccine")]);
        let out = assign_labeling_dates(vec![rec], &triggers(&["#novaccine"]));
        assert_eq!(out.accepted.len(), 1);
        assert_eq!(out.label0_trigger_hits, vec![("u".to_string(), 1)]);
    }

    fn record_with(offsets: &[i64]) -> AccountRecord {
        let ld = day(1000);
        let tweets = offsets
            .iter()
            .enumerate()
            .map(|(i, &o)| {
                Tweet::new(
                    &i.to_string(),
                    "u",
                    Timestamp(ld.0 - o * SECONDS_PER_DAY),
                    &format!("t{i}"),
                )
            })
            .collect();
        let mut rec = AccountRecord::new("u", Label::Anti, tweets);
        rec.labeling_date = Some(ld);
        rec
    }

    #[test]
    fn tweet_at_100_days_falls_in_one_window() {
        let s = slice_windows(&record_with(&[100])).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].window, WindowSpec::new(60, 150).unwrap());
    }

    #[test]
    fn tweet_at_70_days_falls_in_two_windows() {
        let s = slice_windows(&record_with(&[70])).unwrap();
        let windows: Vec<_> = s.iter().map(|x| x.window.to_string()).collect();
        assert_eq!(windows, vec!["[0-90)", "[60-150)"]);
    }

    #[test]
    fn tweets_on_or_after_labeling_date_are_excluded() {
        assert!(slice_windows(&record_with(&[-3])).unwrap().is_empty());
        assert!(slice_windows(&record_with(&[0])).unwrap().is_empty());
        // one second before the labeling date is offset day 0
        let mut rec = record_with(&[]);
        let ld = rec.labeling_date.unwrap();
        rec.tweets.push(Tweet::new("x", "u", Timestamp(ld.0 - 1), "late"));
        let s = slice_windows(&rec).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].window.start_days(), 0);
    }

    #[test]
    fn window_boundaries() {
        let s = slice_windows(&record_with(&[449, 450])).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].window.start_days(), 360);
        assert_eq!(s[0].tweet_count, 1);
    }

    #[test]
    fn documents_are_chronological_newline_joined() {
        let s = slice_windows(&record_with(&[10, 30, 20])).unwrap();
        assert_eq!(s[0].document, "t1\nt2\nt0");
        assert_eq!(s[0].tweet_count, 3);
    }

    #[test]
    fn missing_labeling_date_is_an_error() {
        let mut rec = record_with(&[1]);
        rec.labeling_date = None;
        assert!(matches!(slice_windows(&rec), Err(CorpusError::MissingLabelingDate(_))));
    }

    #[test]
    fn invalid_windows_rejected() {
        assert!(WindowSpec::new(0, 91).is_err());
        assert!(WindowSpec::new(30, 120).is_err());
        assert_eq!(WindowSpec::all().len(), 7);
    }

    fn accounts(n0: usize, n1: usize) -> Vec<(String, Label)> {
        (0..n0)
            .map(|i| (format!("n{i:03}"), Label::NotAnti))
            .chain((0..n1).map(|i| (format!("a{i:03}"), Label::Anti)))
            .collect()
    }

    fn split_of(acc: &[(String, Label)], seed: u64) -> DatasetSplit {
        split_accounts(acc.iter().map(|(id, l)| (id.as_str(), *l)), seed).unwrap()
    }

    #[test]
    fn split_100_balanced() {
        let acc = accounts(50, 50);
        let s = split_of(&acc, 7);
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (70, 15, 15));
        for part in [&s.train, &s.validation, &s.test] {
            let anti = part.iter().filter(|id| id.starts_with('a')).count() as f64;
            assert!((anti / part.len() as f64 - 0.5).abs() <= 0.05);
        }
        assert_eq!(s, split_of(&acc, 7));
    }

    #[test]
    fn split_rounding() {
        // floor(0.15 * 20) = 3 for each holdout, remainder to train
        let s = split_of(&accounts(10, 10), 1);
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (14, 3, 3));
        let s = split_of(&accounts(3, 3), 1);
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (4, 1, 1));
        let s = split_of(&accounts(2, 1), 1);
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (1, 1, 1));
    }

    #[test]
    fn split_needs_three_accounts() {
        let acc = accounts(1, 1);
        assert!(matches!(
            split_accounts(acc.iter().map(|(id, l)| (id.as_str(), *l)), 0),
            Err(CorpusError::TooFewAccounts(2))
        ));
    }

    #[test]
    fn split_independent_of_input_order() {
        let mut acc = accounts(30, 20);
        let a = split_of(&acc, 3);
        acc.reverse();
        assert_eq!(a, split_of(&acc, 3));
        assert_ne!(a, split_of(&acc, 4));
    }

    #[test]
    fn samples_and_split_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let header = ArtifactHeader::new("abc");
        let samples = slice_windows(&record_with(&[1, 70, 100, 400])).unwrap();
        let path = dir.path().join("s.jsonl");
        write_samples(&path, &header, &samples).unwrap();
        assert_eq!(read_samples(&path).unwrap(), samples);

        let split = split_of(&accounts(5, 5), 9);
        let path = dir.path().join("split.csv");
        write_split(&path, &header, &split).unwrap();
        assert_eq!(read_split(&path).unwrap(), split);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_is_partition(n0 in 0usize..60, n1 in 0usize..60, seed in any::<u64>()) {
                prop_assume!(n0 + n1 >= 3);
                let acc = accounts(n0, n1);
                let s = split_of(&acc, seed);
                prop_assert_eq!(s.len(), n0 + n1);
                prop_assert!(s.train.is_disjoint(&s.validation));
                prop_assert!(s.train.is_disjoint(&s.test));
                prop_assert!(s.validation.is_disjoint(&s.test));
                let holdout = holdout_size(n0 + n1);
                prop_assert_eq!(s.validation.len(), holdout);
                prop_assert_eq!(s.test.len(), holdout);
            }

            #[test]
            fn overlap_region_is_shared(offsets in proptest::collection::vec(-20i64..500, 1..40)) {
                let samples = slice_windows(&record_with(&offsets)).unwrap();
                let w0 = samples.iter().find(|s| s.window.start_days() == 0);
                let w60 = samples.iter().find(|s| s.window.start_days() == 60);
                for (i, &o) in offsets.iter().enumerate() {
                    let text = format!("t{i}");
                    let in_doc = |s: Option<&WindowSample>| s.is_some_and(|s| s.document.lines().any(|l| l == text));
                    if (60..90).contains(&o) {
                        prop_assert!(in_doc(w60));
                        prop_assert!(in_doc(w0));
                    }
                    if o <= 0 {
                        prop_assert!(samples.iter().all(|s| !s.document.lines().any(|l| l == text)));
                    }
                }
            }
        }
    }
}
