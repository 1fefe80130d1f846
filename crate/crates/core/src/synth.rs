//! Planted-signal corpus generator.
//!
//! Every tweet draws its words from a Zipf-distributed shared vocabulary,
//! except that each word is replaced, with probability `signal(offset)`, by a
//! uniformly drawn word from the account's class vocabulary (`pro0..` for
//! class 0, `anti0..` for class 1). With `decay_days` set, the probability
//! falls off as `signal * exp(-offset / decay_days)` with the tweet's age in
//! days before the labeling date, so far windows carry less signal. Tweet
//! ages are skewed towards the labeling date, leaving far windows sparser.
//!
//! A class-1 account's labeling date is its first trigger tweet; it also
//! tweets after that date. A class-0 account's last tweet marks its labeling
//! date. Metadata (retweets, replies, quotes, engagement counts, URLs,
//! verification) is drawn from the same distribution for both classes and
//! carries no signal.
//!
//! With `shuffle_labels` the labels are permuted across accounts after
//! generation and each account's original labeling date is written as an
//! explicit date, which leaves text and label independent.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Zipf};
use serde::{Deserialize, Serialize};

use crate::corpus::{write_labels, write_tweets, CorpusError, Label, LabelEntry, Timestamp, Tweet, SECONDS_PER_DAY};
use crate::textlab::{EMOTION_CATEGORIES, MORAL_FOUNDATIONS};

pub const TRIGGER_TERMS: [&str; 3] = ["#novaccine", "#vaccineinjury", "#plandemic"];
/// 2021-01-01T00:00:00Z
const EPOCH_BASE: i64 = 1_609_459_200;
/// Tweets span this many days before the labeling date.
pub const HISTORY_DAYS: f64 = 450.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub accounts: usize,
    pub anti_fraction: f64,
    pub seed: u64,
    /// Per-word probability of a class-vocabulary word at the labeling date.
    pub signal: f64,
    pub decay_days: Option<f64>,
    pub shared_vocab: usize,
    pub class_vocab: usize,
    pub min_tweets: usize,
    pub max_tweets: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Exponent > 1 pushes tweet ages towards the labeling date.
    pub recency_skew: f64,
    pub max_post_label_tweets: usize,
    pub shuffle_labels: bool,
    /// Appends a unique `tagNNN` token to every tweet, for leak audits.
    pub tag_tweets: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            accounts: 1000,
            anti_fraction: 0.5,
            seed: 7,
            signal: 0.2,
            decay_days: None,
            shared_vocab: 800,
            class_vocab: 40,
            min_tweets: 20,
            max_tweets: 60,
            min_words: 6,
            max_words: 14,
            recency_skew: 1.5,
            max_post_label_tweets: 5,
            shuffle_labels: false,
            tag_tweets: false,
        }
    }
}

impl SynthConfig {
    pub fn signal_at(&self, offset_days: f64) -> f64 {
        match self.decay_days {
            Some(tau) => self.signal * (-offset_days / tau).exp(),
            None => self.signal,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SynthCorpus {
    /// Grouped by account, chronological within an account.
    pub tweets: Vec<Tweet>,
    pub labels: Vec<LabelEntry>,
    /// Labeling date each account was generated around, in `labels` order.
    pub labeling_dates: Vec<Timestamp>,
    pub shared_vocab: Vec<String>,
    pub class_vocab: [Vec<String>; 2],
    pub antivax_sources: Vec<String>,
}

pub fn shared_word(i: usize) -> String {
    format!("w{i}")
}

pub fn class_word(label: Label, i: usize) -> String {
    match label {
        Label::NotAnti => format!("pro{i}"),
        Label::Anti => format!("anti{i}"),
    }
}

const DOMAINS: [&str; 6] = [
    "example.com",
    "news.example.org",
    "truthdaily.net",
    "healthfreedom.info",
    "science.gov",
    "journal.example.edu",
];

struct Ctx<'a> {
    cfg: &'a SynthConfig,
    zipf: Zipf<f64>,
    shared: Vec<String>,
    class: [Vec<String>; 2],
    sources: Vec<String>,
    tag: usize,
}

impl Ctx<'_> {
    fn text(&mut self, rng: &mut ChaCha8Rng, label: Label, offset_days: f64) -> String {
        let q = self.cfg.signal_at(offset_days);
        let n = rng.random_range(self.cfg.min_words..=self.cfg.max_words);
        let mut words: Vec<String> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < q {
                    self.class[label.as_u8() as usize].choose(rng).unwrap().clone()
                } else {
                    let rank = self.zipf.sample(rng) as usize;
                    self.shared[rank.clamp(1, self.shared.len()) - 1].clone()
                }
            })
            .collect();
        if self.cfg.tag_tweets {
            words.push(format!("tag{}", self.tag));
        }
        self.tag += 1;
        words.join(" ")
    }

    fn tweet(&mut self, rng: &mut ChaCha8Rng, account: &str, k: usize, at: i64, text: String) -> Tweet {
        let mut t = Tweet::new(&format!("{account}-{k}"), account, Timestamp(at), &text);
        let kind: f64 = rng.random();
        if kind < 0.3 {
            t.is_retweet = true;
            t.retweeted_account_id = Some(self.sources.choose(rng).unwrap().clone());
        } else if kind < 0.45 {
            t.is_reply = true;
        } else if kind < 0.5 {
            t.is_quote = true;
        }
        t.favorites = (rng.random::<f64>().powi(3) * 200.0) as u64;
        t.retweets = (rng.random::<f64>().powi(3) * 50.0) as u64;
        t.replies = rng.random_range(0..5);
        t.quotes = rng.random_range(0..3);
        if rng.random::<f64>() < 0.2 {
            t.urls
                .push(format!("https://{}/p/{}", DOMAINS.choose(rng).unwrap(), self.tag));
            t.text.push_str(" https://t.co/x");
        }
        t
    }
}

pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ctx = Ctx {
        cfg,
        zipf: Zipf::new(cfg.shared_vocab.max(1) as f64, 1.0).expect("valid zipf"),
        shared: (0..cfg.shared_vocab.max(1)).map(shared_word).collect(),
        class: [
            (0..cfg.class_vocab.max(1))
                .map(|i| class_word(Label::NotAnti, i))
                .collect(),
            (0..cfg.class_vocab.max(1))
                .map(|i| class_word(Label::Anti, i))
                .collect(),
        ],
        sources: (0..20).map(|i| format!("src{i}")).collect(),
        tag: 0,
    };
    let n_anti = (cfg.accounts as f64 * cfg.anti_fraction).round() as usize;
    let mut labels: Vec<Label> = (0..cfg.accounts)
        .map(|i| if i < n_anti { Label::Anti } else { Label::NotAnti })
        .collect();
    labels.shuffle(&mut rng);

    let mut out = SynthCorpus::default();
    for (i, &label) in labels.iter().enumerate() {
        let account = format!("acct{i:05}");
        let l_date = EPOCH_BASE
            + (HISTORY_DAYS as i64 + rng.random_range(0..365)) * SECONDS_PER_DAY
            + rng.random_range(0..SECONDS_PER_DAY);
        let n = rng.random_range(cfg.min_tweets..=cfg.max_tweets);
        let mut stamped: Vec<(i64, f64)> = (0..n)
            .map(|_| {
                let age_days = HISTORY_DAYS * rng.random::<f64>().powf(cfg.recency_skew);
                let secs = ((age_days * SECONDS_PER_DAY as f64) as i64).max(1);
                (l_date - secs, age_days)
            })
            .collect();
        stamped.sort_by_key(|a| a.0);
        let mut tweets: Vec<Tweet> = Vec::with_capacity(n + cfg.max_post_label_tweets + 1);
        for (k, &(at, age)) in stamped.iter().enumerate() {
            let text = ctx.text(&mut rng, label, age);
            tweets.push(ctx.tweet(&mut rng, &account, k, at, text));
        }
        // The tweet that fixes the labeling date, then later activity.
        let anchor_text = match label {
            Label::Anti => format!(
                "{} {}",
                ctx.text(&mut rng, label, 0.0),
                TRIGGER_TERMS.choose(&mut rng).unwrap()
            ),
            Label::NotAnti => ctx.text(&mut rng, label, 0.0),
        };
        let k = tweets.len();
        tweets.push(ctx.tweet(&mut rng, &account, k, l_date, anchor_text));
        if label == Label::Anti {
            let extra = rng.random_range(0..=cfg.max_post_label_tweets);
            for j in 0..extra {
                let at = l_date + rng.random_range(0..120 * SECONDS_PER_DAY);
                let mut text = ctx.text(&mut rng, label, 0.0);
                if j % 2 == 0 {
                    text.push(' ');
                    text.push_str(TRIGGER_TERMS.choose(&mut rng).unwrap());
                }
                let k = tweets.len();
                tweets.push(ctx.tweet(&mut rng, &account, k, at, text));
            }
        }
        tweets.sort_by(|a, b| {
            a.created_at
                .cmp(&b.created_at)
                .then_with(|| a.tweet_id.cmp(&b.tweet_id))
        });
        out.tweets.extend(tweets);
        out.labels.push(LabelEntry {
            account_id: account,
            label,
            labeling_date: None,
            verified: rng.random::<f64>() < 0.1,
        });
        out.labeling_dates.push(Timestamp(l_date));
    }

    if cfg.shuffle_labels {
        let mut permuted: Vec<Label> = out.labels.iter().map(|e| e.label).collect();
        permuted.shuffle(&mut rng);
        for ((entry, label), &date) in out.labels.iter_mut().zip(permuted).zip(&out.labeling_dates) {
            entry.label = label;
            entry.labeling_date = Some(date);
        }
    }
    out.antivax_sources = ctx.sources[..5].to_vec();
    out.shared_vocab = ctx.shared;
    out.class_vocab = ctx.class;
    out
}

/// Where [`write_corpus`] put each file.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPaths {
    pub tweets: PathBuf,
    pub labels: PathBuf,
    pub trigger_terms: PathBuf,
    pub vectors: PathBuf,
    pub emotion_lexicon: PathBuf,
    pub axes: PathBuf,
    pub valence_lexicon: PathBuf,
    pub domain_ratings: PathBuf,
    pub antivax_accounts: PathBuf,
}

fn write_file(path: &Path, body: &str) -> Result<(), CorpusError> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(body.as_bytes()))
        .map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes the corpus plus the auxiliary lookup files the analysis and
/// feature commands read: word vectors, emotion lexicon, moral axes, valence
/// lexicon, domain ratings and an anti-vaccine source list. The auxiliary
/// files are drawn from `seed` and are independent of the labels.
pub fn write_corpus(dir: &Path, corpus: &SynthCorpus, seed: u64) -> Result<SynthPaths, CorpusError> {
    fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let paths = SynthPaths {
        tweets: dir.join("tweets.jsonl"),
        labels: dir.join("labels.csv"),
        trigger_terms: dir.join("triggers.txt"),
        vectors: dir.join("vectors.txt"),
        emotion_lexicon: dir.join("emotion_lexicon.csv"),
        axes: dir.join("moral_axes.csv"),
        valence_lexicon: dir.join("valence.csv"),
        domain_ratings: dir.join("domain_ratings.csv"),
        antivax_accounts: dir.join("antivax_accounts.txt"),
    };
    write_tweets(&paths.tweets, &corpus.tweets)?;
    write_labels(&paths.labels, &corpus.labels)?;
    write_file(&paths.trigger_terms, &(TRIGGER_TERMS.join("\n") + "\n"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a0c5);
    let vocab: Vec<&String> = corpus
        .shared_vocab
        .iter()
        .chain(corpus.class_vocab[0].iter())
        .chain(corpus.class_vocab[1].iter())
        .collect();
    let dim = 16;
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let mut vectors = format!("{} {dim}\n", vocab.len());
    for w in &vocab {
        let v: Vec<String> = (0..dim).map(|_| format!("{:.6}", normal.sample(&mut rng))).collect();
        vectors.push_str(&format!("{w} {}\n", v.join(" ")));
    }
    write_file(&paths.vectors, &vectors)?;

    let mut lexicon = String::from("token,category\n");
    for w in &vocab {
        if rng.random::<f64>() < 0.15 {
            let c = EMOTION_CATEGORIES.choose(&mut rng).unwrap();
            lexicon.push_str(&format!("{w},{c}\n"));
        }
    }
    write_file(&paths.emotion_lexicon, &lexicon)?;

    let mut axes = String::from("foundation,pole,word\n");
    let mut pool: Vec<&String> = corpus.shared_vocab.iter().take(200).collect();
    pool.shuffle(&mut rng);
    for (f, words) in MORAL_FOUNDATIONS.iter().zip(pool.chunks(6)) {
        for (j, w) in words.iter().enumerate() {
            axes.push_str(&format!("{f},{},{w}\n", if j < 3 { "+" } else { "-" }));
        }
    }
    write_file(&paths.axes, &axes)?;

    let mut valence = String::from("token,score\n");
    for w in &vocab {
        if rng.random::<f64>() < 0.1 {
            valence.push_str(&format!("{w},{:.3}\n", rng.random_range(-1.0..=1.0)));
        }
    }
    write_file(&paths.valence_lexicon, &valence)?;

    let ratings = "hostname,category\ntruthdaily.net,conspiracy_pseudoscience\nhealthfreedom.info,questionable\nscience.gov,pro_science\n";
    write_file(&paths.domain_ratings, ratings)?;
    write_file(&paths.antivax_accounts, &(corpus.antivax_sources.join("\n") + "\n"))?;
    Ok(paths)
}

pub fn trigger_set() -> HashSet<String> {
    TRIGGER_TERMS.iter().map(|s| s.to_string()).collect()
}
