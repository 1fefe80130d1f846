//! The commands behind the CLI. Each reads the run configuration, writes its
//! artifacts under the output directory and returns a summary for callers.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::artifact::ArtifactHeader;
use crate::config::{AnalysisUnit, ConfigError, ReportFormat, RunConfig};
use crate::corpus::{
    assign_labeling_dates, ingest_corpus, read_samples, read_split, read_tweets, slice_tweets, slice_windows,
    split_accounts, window_tweets, write_samples, write_split, AccountRecord, CorpusError, DatasetSplit, Label,
    SplitPart, Timestamp, Tweet, WindowSample, WindowSpec,
};
use crate::embed::{embed_all, load_vectors, EmbedError, Embedder};
use crate::eval::{
    csv_table, evaluate_windows, overall_table_csv, overall_table_text, text_table, threshold_curve_csv,
    tune_threshold, window_table_csv, window_table_text, EvalError, MetricsReport, ThresholdCurve, WindowedScore,
};
use crate::features::{
    ablation_report, extract_features, load_antivax_accounts, load_domain_ratings, load_valence_lexicon,
    AblationReport, DomainRatingTable, FeatureError, Standardizer,
};
use crate::model::{load_model, save_model, train, EpochLog, MlpParameters, ModelError};
use crate::textlab::{
    background_biases, class_comparison_report, emotion_profile, frameaxis_profiles, frequency_compare, load_axes,
    load_emotion_lexicon, ComparisonRow, TextlabError, EMOTION_CATEGORIES,
};

pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const SPLIT_FILE: &str = "split.csv";
pub const MODEL_FILE: &str = "model.bin";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const CURVE_FILE: &str = "threshold_curve.csv";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Textlab(#[from] TextlabError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("model was trained with embedder {model}, configuration builds {config}")]
    EmbedderMismatch { model: String, config: String },
    #[error("{0}")]
    Data(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// 1 usage, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(ConfigError::Invalid(_) | ConfigError::Parse { .. }) => 1,
            PipelineError::Model(ModelError::Diverged(_)) | PipelineError::Output { .. } => 3,
            PipelineError::Model(ModelError::Config(_)) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

struct Out {
    dir: PathBuf,
    header: ArtifactHeader,
    format: ReportFormat,
}

impl Out {
    fn new(cfg: &RunConfig) -> Result<Out> {
        let dir = cfg.paths.output_dir.clone();
        fs::create_dir_all(&dir).map_err(|source| PipelineError::Output {
            path: dir.clone(),
            source,
        })?;
        Ok(Out {
            dir,
            header: ArtifactHeader::new(&cfg.config_hash()),
            format: cfg.format,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn ext(&self) -> &'static str {
        match self.format {
            ReportFormat::Text => "txt",
            ReportFormat::Csv => "csv",
        }
    }

    /// Writes `body` under the comment header; returns the path.
    fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.path(name);
        let text = format!("{}\n{body}", self.header.comment_line());
        fs::write(&path, text).map_err(|source| PipelineError::Output {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    fn table(&self, stem: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let body = match self.format {
            ReportFormat::Text => text_table(header, rows),
            ReportFormat::Csv => csv_table(header, rows),
        };
        self.write(&format!("{stem}.{}", self.ext()), &body)
    }
}

fn read_trigger_terms(path: &Path) -> Result<HashSet<String>> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

/// Ingested, labeled accounts and their window samples.
pub struct Prepared {
    pub records: Vec<AccountRecord>,
    pub samples: Vec<WindowSample>,
    pub split: DatasetSplit,
    pub rejected: Vec<(String, String)>,
    pub without_samples: Vec<String>,
}

pub fn prepare_corpus(cfg: &RunConfig) -> Result<Prepared> {
    let tweets = cfg.require("tweets", &cfg.paths.tweets)?;
    let labels = cfg.require("labels", &cfg.paths.labels)?;
    let triggers = match &cfg.paths.trigger_terms {
        Some(_) => read_trigger_terms(&cfg.require("trigger_terms", &cfg.paths.trigger_terms)?)?,
        None => HashSet::new(),
    };
    let report = ingest_corpus(&tweets, &labels)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    log::info!(
        "ingested {} accounts ({} malformed lines, {} bad timestamps, {} unlabeled accounts)",
        report.accounts.len(),
        report.malformed_lines,
        report.bad_timestamps,
        report.unlabeled_accounts
    );
    let outcome = assign_labeling_dates(report.accounts, &triggers);
    let mut samples = Vec::new();
    let mut without_samples = Vec::new();
    let mut with_samples: Vec<(&str, Label)> = Vec::new();
    for r in &outcome.accepted {
        let s = slice_windows(r)?;
        if s.is_empty() {
            log::warn!(
                "account {} has no tweets before its labeling date; 0 samples",
                r.account_id
            );
            without_samples.push(r.account_id.clone());
        } else {
            with_samples.push((&r.account_id, r.label));
        }
        samples.extend(s);
    }
    let split = split_accounts(with_samples, cfg.split_seed)?;
    Ok(Prepared {
        records: outcome.accepted,
        samples,
        split,
        rejected: outcome.rejected,
        without_samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildSummary {
    pub accounts: usize,
    pub rejected: usize,
    pub without_samples: usize,
    pub samples: usize,
    pub split_sizes: [usize; 3],
    /// (class 0, class 1) sample counts per window, in window order.
    pub per_window: Vec<(usize, usize)>,
    pub files: Vec<PathBuf>,
}

fn split_parts() -> [SplitPart; 3] {
    [SplitPart::Train, SplitPart::Validation, SplitPart::Test]
}

pub fn cmd_build_dataset(cfg: &RunConfig) -> Result<BuildSummary> {
    cfg.validate()?;
    let out = Out::new(cfg)?;
    let p = prepare_corpus(cfg)?;
    let samples_path = out.path(SAMPLES_FILE);
    write_samples(&samples_path, &out.header, &p.samples)?;
    let split_path = out.path(SPLIT_FILE);
    write_split(&split_path, &out.header, &p.split)?;

    // counts[window][part][class]
    let mut counts = [[[0usize; 2]; 3]; 7];
    for s in &p.samples {
        if let Some(part) = p.split.part_of(&s.account_id) {
            let pi = split_parts().iter().position(|&x| x == part).unwrap();
            counts[s.window.index()][pi][s.label.as_u8() as usize] += 1;
        }
    }
    let header = [
        "window",
        "train_class0",
        "train_class1",
        "validation_class0",
        "validation_class1",
        "test_class0",
        "test_class1",
        "total_class0",
        "total_class1",
    ];
    let row = |name: String, c: &[[usize; 2]; 3]| {
        let mut r = vec![name];
        for part in c {
            r.push(part[0].to_string());
            r.push(part[1].to_string());
        }
        r.push(c.iter().map(|x| x[0]).sum::<usize>().to_string());
        r.push(c.iter().map(|x| x[1]).sum::<usize>().to_string());
        r
    };
    let mut all = [[0usize; 2]; 3];
    for w in &counts {
        for (a, b) in all.iter_mut().zip(w) {
            a[0] += b[0];
            a[1] += b[1];
        }
    }
    let mut rows = vec![row(crate::eval::ALL_WINDOWS.to_string(), &all)];
    for (w, c) in WindowSpec::all().iter().zip(&counts) {
        rows.push(row(w.to_string(), c));
    }
    let stats_path = out.table("dataset_stats", &header, &rows)?;
    log::info!(
        "{} samples from {} accounts; split {}/{}/{}",
        p.samples.len(),
        p.split.len(),
        p.split.train.len(),
        p.split.validation.len(),
        p.split.test.len()
    );
    Ok(BuildSummary {
        accounts: p.records.len(),
        rejected: p.rejected.len(),
        without_samples: p.without_samples.len(),
        samples: p.samples.len(),
        split_sizes: [p.split.train.len(), p.split.validation.len(), p.split.test.len()],
        per_window: counts
            .iter()
            .map(|w| (w.iter().map(|x| x[0]).sum(), w.iter().map(|x| x[1]).sum()))
            .collect(),
        files: vec![samples_path, split_path, stats_path],
    })
}

/// Samples of one split part with their inputs.
struct Part {
    windows: Vec<WindowSpec>,
    inputs: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl Part {
    fn pairs(&self) -> Vec<(&[f64], u8)> {
        self.inputs
            .iter()
            .map(Vec::as_slice)
            .zip(self.labels.iter().copied())
            .collect()
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<(Vec<WindowSample>, DatasetSplit)> {
    let dir = &cfg.paths.output_dir;
    let samples = read_samples(&dir.join(SAMPLES_FILE))?;
    let split = read_split(&dir.join(SPLIT_FILE))?;
    Ok((samples, split))
}

/// Embeds the samples of `part`, optionally appending extra per-sample columns.
fn embed_part(
    samples: &[WindowSample],
    split: &DatasetSplit,
    part: SplitPart,
    embedder: &dyn Embedder,
    extra: Option<&dyn Fn(usize) -> Vec<f64>>,
) -> Part {
    let idx: Vec<usize> = (0..samples.len())
        .filter(|&i| split.part_of(&samples[i].account_id) == Some(part))
        .collect();
    let docs: Vec<&str> = idx.iter().map(|&i| samples[i].document.as_str()).collect();
    let vecs = embed_all(embedder, &docs);
    let inputs = idx
        .iter()
        .zip(vecs)
        .map(|(&i, v)| {
            let mut x = v.values;
            if let Some(f) = extra {
                x.extend(f(i));
            }
            x
        })
        .collect();
    Part {
        windows: idx.iter().map(|&i| samples[i].window).collect(),
        labels: idx.iter().map(|&i| samples[i].label.as_u8()).collect(),
        inputs,
    }
}

fn train_log_csv(log: &[EpochLog], best_epoch: usize, stopped_early: bool) -> String {
    let mut s = format!("# best_epoch={best_epoch} stopped_early={stopped_early}\n");
    s.push_str("epoch,batch_loss,train_loss,validation_loss,validation_accuracy\n");
    for e in log {
        s.push_str(&format!(
            "{},{:.10},{:.10},{:.10},{:.6}\n",
            e.epoch, e.batch_loss, e.train_loss, e.validation_loss, e.validation_accuracy
        ));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub log: Vec<EpochLog>,
    pub model_path: PathBuf,
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let out = Out::new(cfg)?;
    let (samples, split) = load_dataset(cfg)?;
    let embedder = cfg.embedder.build()?;
    let tr = embed_part(&samples, &split, SplitPart::Train, embedder.as_ref(), None);
    let va = embed_part(&samples, &split, SplitPart::Validation, embedder.as_ref(), None);
    let outcome = train(&tr.pairs(), &va.pairs(), &cfg.train, &embedder.id())?;
    let mut params = outcome.params;
    params.threshold = 0.5;
    params.metadata = out.header.comment_line().trim_start_matches("# ").to_string();
    let model_path = out.path(MODEL_FILE);
    save_model(&params, &model_path)?;
    out.write(
        TRAIN_LOG_FILE,
        &train_log_csv(&outcome.log, outcome.best_epoch, outcome.stopped_early),
    )?;
    log::info!(
        "trained {} epochs, best epoch {} (validation loss {:.5})",
        outcome.log.len(),
        outcome.best_epoch,
        outcome.log[outcome.best_epoch - 1].validation_loss
    );
    Ok(TrainSummary {
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.log.len(),
        stopped_early: outcome.stopped_early,
        log: outcome.log,
        model_path,
    })
}

fn check_embedder(model: &MlpParameters, embedder: &dyn Embedder) -> Result<()> {
    if model.embedder_id != embedder.id() {
        return Err(PipelineError::EmbedderMismatch {
            model: model.embedder_id.clone(),
            config: embedder.id(),
        });
    }
    Ok(())
}

fn score(model: &MlpParameters, part: &Part) -> Result<Vec<f64>> {
    part.inputs
        .iter()
        .map(|x| model.predict_p1(x).map_err(PipelineError::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub threshold: f64,
    pub validation_f1_tuned: f64,
    pub validation_f1_at_half: f64,
    pub curve: ThresholdCurve,
    /// "All Windows" first, then one row per window.
    pub test_windows: Vec<MetricsReport>,
    pub files: Vec<PathBuf>,
}

/// Tunes the threshold on the validation split, stores it in the model file
/// and evaluates the test split at it.
pub fn cmd_tune_and_evaluate(cfg: &RunConfig) -> Result<EvalSummary> {
    cfg.validate()?;
    let out = Out::new(cfg)?;
    let (samples, split) = load_dataset(cfg)?;
    let model_path = out.path(MODEL_FILE);
    let mut model = load_model(&model_path)?;
    let embedder = cfg.embedder.build()?;
    check_embedder(&model, embedder.as_ref())?;

    let va = embed_part(&samples, &split, SplitPart::Validation, embedder.as_ref(), None);
    let va_scores = score(&model, &va)?;
    let curve = tune_threshold(&va_scores, &va.labels, cfg.grid_step)?;
    let f1_half = crate::eval::confusion_and_rates(&va_scores, &va.labels, 0.5)?.f1;
    model.threshold = curve.best_threshold;
    save_model(&model, &model_path)?;

    let te = embed_part(&samples, &split, SplitPart::Test, embedder.as_ref(), None);
    let te_scores = score(&model, &te)?;
    let windowed: Vec<WindowedScore> = te
        .windows
        .iter()
        .zip(&te_scores)
        .zip(&te.labels)
        .map(|((&window, &score), &label)| WindowedScore { window, score, label })
        .collect();
    let rows = evaluate_windows(&windowed, model.threshold)?;

    let mut files = vec![model_path];
    files.push(out.write(CURVE_FILE, &threshold_curve_csv(&curve))?);
    let (overall, by_window) = match cfg.format {
        ReportFormat::Text => (overall_table_text(&rows[0]), window_table_text(&rows)),
        ReportFormat::Csv => (overall_table_csv(&rows[0]), window_table_csv(&rows)),
    };
    files.push(out.write(&format!("metrics_overall.{}", out.ext()), &overall)?);
    files.push(out.write(&format!("metrics_by_window.{}", out.ext()), &by_window)?);
    let tuning = vec![
        vec!["threshold".to_string(), format!("{:.10}", curve.best_threshold)],
        vec!["validation_f1_tuned".to_string(), format!("{:.10}", curve.best_f1)],
        vec!["validation_f1_at_0.5".to_string(), format!("{:.10}", f1_half)],
    ];
    files.push(out.table("tuning", &["quantity", "value"], &tuning)?);
    log::info!(
        "threshold {:.4} (validation F1 {:.4}, {:.4} at 0.5); test ROC-AUC {}",
        curve.best_threshold,
        curve.best_f1,
        f1_half,
        rows[0].roc_auc.map_or("NA".to_string(), |v| format!("{v:.4}"))
    );
    Ok(EvalSummary {
        threshold: curve.best_threshold,
        validation_f1_tuned: curve.best_f1,
        validation_f1_at_half: f1_half,
        curve,
        test_windows: rows,
        files,
    })
}

/// Supplies account timelines to the predictor. The file-backed source is
/// the only one shipped; a networked client can implement the same trait.
pub trait TimelineSource {
    fn accounts(&self) -> Vec<String>;
    fn timeline(&self, account_id: &str) -> Result<Vec<Tweet>>;
}

pub struct FileTimelineSource {
    by_account: BTreeMap<String, Vec<Tweet>>,
}

impl FileTimelineSource {
    pub fn open(path: &Path) -> Result<FileTimelineSource> {
        let file = read_tweets(path)?;
        for w in &file.warnings {
            log::warn!("{w}");
        }
        Ok(FileTimelineSource {
            by_account: file.by_account,
        })
    }
}

impl TimelineSource for FileTimelineSource {
    fn accounts(&self) -> Vec<String> {
        self.by_account.keys().cloned().collect()
    }

    fn timeline(&self, account_id: &str) -> Result<Vec<Tweet>> {
        self.by_account
            .get(account_id)
            .cloned()
            .ok_or_else(|| PipelineError::Data(format!("no tweets for account {account_id}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionStatus {
    Scored,
    InsufficientData,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionResult {
    pub account_id: String,
    pub status: PredictionStatus,
    pub p_not_anti: Option<f64>,
    pub p_anti: Option<f64>,
    pub threshold: f64,
    pub class_at_threshold: Option<u8>,
    /// Present only when the 0.5 cut disagrees with the stored threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_at_half: Option<u8>,
    pub windows_used: Vec<String>,
    pub tweets_seen: usize,
    pub as_of: String,
}

/// Scores the most recent window before `as_of`, or before the account's
/// latest tweet when `as_of` is absent.
pub fn predict_account(
    model: &MlpParameters,
    embedder: &dyn Embedder,
    account_id: &str,
    mut tweets: Vec<Tweet>,
    as_of: Option<Timestamp>,
) -> Result<PredictionResult> {
    crate::corpus::sort_tweets(&mut tweets);
    let latest = tweets.iter().map(|t| t.created_at).max();
    let mut result = PredictionResult {
        account_id: account_id.to_string(),
        status: PredictionStatus::InsufficientData,
        p_not_anti: None,
        p_anti: None,
        threshold: model.threshold,
        class_at_threshold: None,
        class_at_half: None,
        windows_used: Vec::new(),
        tweets_seen: 0,
        as_of: String::new(),
    };
    let Some(date) = as_of.or(latest) else {
        return Ok(result);
    };
    result.as_of = date.to_rfc3339();
    let window = WindowSpec::most_recent();
    result.tweets_seen = window_tweets(&tweets, date, window).len();
    let samples = slice_tweets(account_id, Label::NotAnti, &tweets, date, &[window]);
    let Some(sample) = samples.first() else {
        return Ok(result);
    };
    let x = embedder.embed(&sample.document).values;
    let (p0, p1) = model.predict(&x)?;
    let class = u8::from(p1 >= model.threshold);
    let half = u8::from(p1 >= 0.5);
    result.status = PredictionStatus::Scored;
    result.p_not_anti = Some(p0);
    result.p_anti = Some(p1);
    result.class_at_threshold = Some(class);
    result.class_at_half = (half != class).then_some(half);
    result.windows_used = vec![window.to_string()];
    Ok(result)
}

pub fn predict_from_source(
    model: &MlpParameters,
    embedder: &dyn Embedder,
    source: &dyn TimelineSource,
    as_of: Option<Timestamp>,
) -> Result<Vec<PredictionResult>> {
    check_embedder(model, embedder)?;
    source
        .accounts()
        .iter()
        .map(|a| predict_account(model, embedder, a, source.timeline(a)?, as_of))
        .collect()
}

/// Scores every account of `tweets_path` and writes `predictions.jsonl`.
pub fn cmd_predict(
    cfg: &RunConfig,
    model_path: Option<&Path>,
    tweets_path: &Path,
    as_of: Option<Timestamp>,
) -> Result<Vec<PredictionResult>> {
    let out = Out::new(cfg)?;
    let model_path = model_path.map_or_else(|| out.path(MODEL_FILE), Path::to_path_buf);
    let model = load_model(&model_path)?;
    let embedder = cfg.embedder.build()?;
    let source = FileTimelineSource::open(tweets_path)?;
    let results = predict_from_source(&model, embedder.as_ref(), &source, as_of)?;
    let mut body = out.header.json_line();
    body.push('\n');
    for r in &results {
        body.push_str(&serde_json::to_string(r).expect("prediction serializes"));
        body.push('\n');
    }
    let path = out.path(PREDICTIONS_FILE);
    fs::write(&path, body).map_err(|source| PipelineError::Output { path, source })?;
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeSummary {
    pub frequency_tokens: usize,
    pub emotion_rows: Vec<ComparisonRow>,
    pub moral_rows: Vec<ComparisonRow>,
    pub background: Vec<(String, f64)>,
    pub files: Vec<PathBuf>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

fn comparison_rows(rows: &[ComparisonRow], means: &[(f64, f64)]) -> Vec<Vec<String>> {
    rows.iter()
        .zip(means)
        .map(|(r, (m0, m1))| {
            vec![
                r.feature.clone(),
                r.n_class0.to_string(),
                r.n_class1.to_string(),
                format!("{m0:.6}"),
                format!("{m1:.6}"),
                fmt_opt(r.median_class0),
                fmt_opt(r.median_class1),
                r.u.map_or_else(|| "NA".to_string(), |u| format!("{u}")),
                r.p_value.map_or_else(|| "NA".to_string(), |p| format!("{p:.6e}")),
                r.direction.to_string(),
            ]
        })
        .collect()
}

const COMPARISON_HEADER: [&str; 10] = [
    "feature",
    "n_class0",
    "n_class1",
    "mean_class0",
    "mean_class1",
    "median_class0",
    "median_class1",
    "u",
    "p_value",
    "direction_class1",
];

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Word frequencies, emotion profiles, moral-foundation profiles and their
/// background biases, with class comparisons. Uses every tweet of every
/// labeled account.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<AnalyzeSummary> {
    cfg.validate()?;
    let out = Out::new(cfg)?;
    let tweets = cfg.require("tweets", &cfg.paths.tweets)?;
    let labels = cfg.require("labels", &cfg.paths.labels)?;
    let report = ingest_corpus(&tweets, &labels)?;
    let mut tweet_docs: [Vec<&str>; 2] = [Vec::new(), Vec::new()];
    let mut account_docs: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    for a in &report.accounts {
        let c = a.label.as_u8() as usize;
        tweet_docs[c].extend(a.tweets.iter().map(|t| t.text.as_str()));
        account_docs[c].push(a.tweets.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join("\n"));
    }
    let docs_for = |unit: AnalysisUnit, c: usize| -> Vec<&str> {
        match unit {
            AnalysisUnit::Tweet => tweet_docs[c].clone(),
            AnalysisUnit::Account => account_docs[c].iter().map(String::as_str).collect(),
        }
    };
    let a = &cfg.analysis;
    let mut files = Vec::new();

    let freq = frequency_compare(&tweet_docs[0], &tweet_docs[1], a.min_count, a.smoothing)?;
    let rate_rank: HashMap<&str, usize> = freq
        .by_rate()
        .iter()
        .enumerate()
        .map(|(i, t)| (t.token.as_str(), i + 1))
        .collect();
    let freq_rows: Vec<Vec<String>> = freq
        .by_skew()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            vec![
                t.token.clone(),
                t.count_class0.to_string(),
                t.count_class1.to_string(),
                format!("{:.4}", t.rate_class0),
                format!("{:.4}", t.rate_class1),
                format!("{:.6}", t.skew),
                (i + 1).to_string(),
                rate_rank[t.token.as_str()].to_string(),
            ]
        })
        .collect();
    files.push(out.table(
        "frequency",
        &[
            "token",
            "count_class0",
            "count_class1",
            "rate_class0",
            "rate_class1",
            "skew",
            "rank_skew",
            "rank_rate",
        ],
        &freq_rows,
    )?);

    let mut emotion_rows = Vec::new();
    match &cfg.paths.emotion_lexicon {
        Some(_) => {
            let lex = load_emotion_lexicon(&cfg.require("emotion_lexicon", &cfg.paths.emotion_lexicon)?)?;
            let p0 = emotion_profile(&docs_for(a.emotion_unit, 0), &lex)?;
            let p1 = emotion_profile(&docs_for(a.emotion_unit, 1), &lex)?;
            let names: Vec<String> = EMOTION_CATEGORIES.iter().map(|s| s.to_string()).collect();
            let l0: Vec<Vec<f64>> = (0..10).map(|c| p0.category_scores(c)).collect();
            let l1: Vec<Vec<f64>> = (0..10).map(|c| p1.category_scores(c)).collect();
            emotion_rows = class_comparison_report(&names, &l0, &l1, a.alpha);
            let means: Vec<(f64, f64)> = (0..10).map(|c| (p0.means[c], p1.means[c])).collect();
            files.push(out.table("emotions", &COMPARISON_HEADER, &comparison_rows(&emotion_rows, &means))?);
        }
        None => log::warn!("paths.emotion_lexicon not set; emotion report skipped"),
    }

    let mut moral_rows = Vec::new();
    let mut background = Vec::new();
    match (&cfg.paths.vectors, &cfg.paths.axes) {
        (Some(_), Some(_)) => {
            let (table, _) = load_vectors(&cfg.require("vectors", &cfg.paths.vectors)?)?;
            let axes = load_axes(&cfg.require("axes", &cfg.paths.axes)?, &table)?;
            let pooled: Vec<&str> = tweet_docs[0].iter().chain(&tweet_docs[1]).copied().collect();
            let bg = background_biases(&pooled, &axes, &table)?;
            background = axes
                .iter()
                .map(|x| x.foundation.clone())
                .zip(bg.iter().copied())
                .collect();
            let mut names = Vec::new();
            let mut lists: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
            let profiles = [
                frameaxis_profiles(&docs_for(a.moral_unit, 0), &axes, &table, &bg)?,
                frameaxis_profiles(&docs_for(a.moral_unit, 1), &axes, &table, &bg)?,
            ];
            for (k, axis) in axes.iter().enumerate() {
                names.push(format!("{}_bias", axis.foundation));
                names.push(format!("{}_intensity", axis.foundation));
                for c in 0..2 {
                    let scored: Vec<_> = profiles[c].iter().filter(|p| !p.no_in_vocab).collect();
                    lists[c].push(scored.iter().map(|p| p.bias[k]).collect());
                    lists[c].push(scored.iter().map(|p| p.intensity[k]).collect());
                }
            }
            for (c, ps) in profiles.iter().enumerate() {
                let flagged = ps.iter().filter(|p| p.no_in_vocab).count();
                if flagged > 0 {
                    log::info!(
                        "class {c}: {flagged} document(s) without in-vocabulary tokens left out of moral scores"
                    );
                }
            }
            moral_rows = class_comparison_report(&names, &lists[0], &lists[1], a.alpha);
            let means: Vec<(f64, f64)> = lists[0]
                .iter()
                .zip(&lists[1])
                .map(|(x, y)| (mean(x), mean(y)))
                .collect();
            files.push(out.table("morals", &COMPARISON_HEADER, &comparison_rows(&moral_rows, &means))?);
            let bg_rows: Vec<Vec<String>> = background
                .iter()
                .map(|(f, v)| vec![f.clone(), format!("{v:.10}")])
                .collect();
            files.push(out.table("background_bias", &["foundation", "background_bias"], &bg_rows)?);
        }
        _ => log::warn!("paths.vectors or paths.axes not set; moral reports skipped"),
    }
    Ok(AnalyzeSummary {
        frequency_tokens: freq.tokens.len(),
        emotion_rows,
        moral_rows,
        background,
        files,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationSummary {
    pub report: AblationReport,
    pub with_features: MetricsReport,
    pub without_features: MetricsReport,
    pub files: Vec<PathBuf>,
}

/// Trains, tunes and tests twice on the same split: text embeddings alone,
/// and text embeddings plus standardized engineered features.
pub fn cmd_ablation(cfg: &RunConfig) -> Result<AblationSummary> {
    cfg.validate()?;
    let out = Out::new(cfg)?;
    let p = prepare_corpus(cfg)?;
    let valence = match &cfg.paths.valence_lexicon {
        Some(_) => load_valence_lexicon(&cfg.require("valence_lexicon", &cfg.paths.valence_lexicon)?)?,
        None => HashMap::new(),
    };
    let antivax = match &cfg.paths.antivax_accounts {
        Some(_) => load_antivax_accounts(&cfg.require("antivax_accounts", &cfg.paths.antivax_accounts)?)?,
        None => HashSet::new(),
    };
    let ratings = match &cfg.paths.domain_ratings {
        Some(_) => load_domain_ratings(&cfg.require("domain_ratings", &cfg.paths.domain_ratings)?)?,
        None => DomainRatingTable::new(),
    };
    let by_id: HashMap<&str, &AccountRecord> = p.records.iter().map(|r| (r.account_id.as_str(), r)).collect();
    let raw: Vec<Vec<f64>> = p
        .samples
        .iter()
        .map(|s| {
            let r = by_id[s.account_id.as_str()];
            let ts = window_tweets(&r.tweets, r.labeling_date.expect("labeled"), s.window);
            extract_features(&ts, r.verified, &valence, &antivax, &ratings).to_vec()
        })
        .collect();
    let train_rows: Vec<Vec<f64>> = p
        .samples
        .iter()
        .zip(&raw)
        .filter(|(s, _)| p.split.part_of(&s.account_id) == Some(SplitPart::Train))
        .map(|(_, r)| r.clone())
        .collect();
    let scaler = Standardizer::fit(&train_rows)?;
    let scaled: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| scaler.transform(r))
        .collect::<std::result::Result<_, _>>()?;

    let embedder = cfg.embedder.build()?;
    let run = |with: bool| -> Result<MetricsReport> {
        let extra = |i: usize| scaled[i].clone();
        let extra_ref: Option<&dyn Fn(usize) -> Vec<f64>> = if with { Some(&extra) } else { None };
        let tr = embed_part(&p.samples, &p.split, SplitPart::Train, embedder.as_ref(), extra_ref);
        let va = embed_part(
            &p.samples,
            &p.split,
            SplitPart::Validation,
            embedder.as_ref(),
            extra_ref,
        );
        let te = embed_part(&p.samples, &p.split, SplitPart::Test, embedder.as_ref(), extra_ref);
        let model = train(&tr.pairs(), &va.pairs(), &cfg.train, &embedder.id())?.params;
        let curve = tune_threshold(&score(&model, &va)?, &va.labels, cfg.grid_step)?;
        Ok(MetricsReport::compute(
            "test",
            &score(&model, &te)?,
            &te.labels,
            curve.best_threshold,
        )?)
    };
    let with_features = run(true)?;
    let without_features = run(false)?;
    let report = ablation_report(&with_features, &without_features)?;
    let body = match cfg.format {
        ReportFormat::Text => report.to_text(),
        ReportFormat::Csv => report.to_csv(),
    };
    let files = vec![out.write(&format!("ablation.{}", out.ext()), &body)?];
    log::info!("engineered features: {}", report.verdict());
    Ok(AblationSummary {
        report,
        with_features,
        without_features,
        files,
    })
}

/// Generates a planted-signal corpus in `dir` together with a run
/// configuration pointing at it; returns the configuration path.
pub fn cmd_synth(synth: &crate::synth::SynthConfig, dir: &Path, base: &RunConfig) -> Result<PathBuf> {
    let corpus = crate::synth::generate(synth);
    let paths = crate::synth::write_corpus(dir, &corpus, synth.seed)?;
    let mut cfg = base.clone();
    let rel = |p: &Path| PathBuf::from(p.file_name().expect("file name"));
    cfg.paths.tweets = Some(rel(&paths.tweets));
    cfg.paths.labels = Some(rel(&paths.labels));
    cfg.paths.trigger_terms = Some(rel(&paths.trigger_terms));
    cfg.paths.vectors = Some(rel(&paths.vectors));
    cfg.paths.emotion_lexicon = Some(rel(&paths.emotion_lexicon));
    cfg.paths.axes = Some(rel(&paths.axes));
    cfg.paths.valence_lexicon = Some(rel(&paths.valence_lexicon));
    cfg.paths.domain_ratings = Some(rel(&paths.domain_ratings));
    cfg.paths.antivax_accounts = Some(rel(&paths.antivax_accounts));
    if cfg.paths.output_dir.as_os_str().is_empty() || cfg.paths.output_dir.is_absolute() {
        cfg.paths.output_dir = PathBuf::from("out");
    }
    let path = dir.join("run.toml");
    fs::write(&path, cfg.to_toml()).map_err(|source| PipelineError::Output {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}
