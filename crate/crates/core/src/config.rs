//! Run configuration: one TOML file drives every command.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::sha256_hex;
use crate::embed::EmbedderConfig;
use crate::eval::DEFAULT_GRID_STEP;
use crate::model::TrainConfig;
use crate::textlab::DEFAULT_SMOOTHING;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("config: {0}")]
    Invalid(String),
    #[error("config: {what} {path} does not exist")]
    MissingPath { what: &'static str, path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Text,
    Csv,
}

/// Aggregation unit for per-document scores in the analysis reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisUnit {
    Tweet,
    Account,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub tweets: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// One trigger term per line.
    pub trigger_terms: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub emotion_lexicon: Option<PathBuf>,
    pub axes: Option<PathBuf>,
    pub valence_lexicon: Option<PathBuf>,
    pub domain_ratings: Option<PathBuf>,
    pub antivax_accounts: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub min_count: u64,
    pub smoothing: f64,
    pub alpha: f64,
    pub emotion_unit: AnalysisUnit,
    pub moral_unit: AnalysisUnit,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            min_count: 50,
            smoothing: DEFAULT_SMOOTHING,
            alpha: crate::textlab::DEFAULT_ALPHA,
            emotion_unit: AnalysisUnit::Tweet,
            moral_unit: AnalysisUnit::Account,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub embedder: EmbedderConfig,
    pub train: TrainConfig,
    pub split_seed: u64,
    pub grid_step: f64,
    pub format: ReportFormat,
    pub analysis: AnalysisConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: PathsConfig {
                output_dir: PathBuf::from("out"),
                ..PathsConfig::default()
            },
            embedder: EmbedderConfig::default(),
            train: TrainConfig::default(),
            split_seed: 0,
            grid_step: DEFAULT_GRID_STEP,
            format: ReportFormat::Text,
            analysis: AnalysisConfig::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// Parses `path`; relative paths inside are taken relative to its directory.
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for opt in [
            &mut p.tweets,
            &mut p.labels,
            &mut p.trigger_terms,
            &mut p.vectors,
            &mut p.emotion_lexicon,
            &mut p.axes,
            &mut p.valence_lexicon,
            &mut p.domain_ratings,
            &mut p.antivax_accounts,
        ] {
            if let Some(x) = opt.as_mut() {
                resolve(base, x);
            }
        }
        resolve(base, &mut p.output_dir);
        if let EmbedderConfig::Wordvec { vectors } = &mut self.embedder {
            resolve(base, vectors);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Parameter checks that need no file access.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.grid_step > 0.0 && self.grid_step <= 0.5) {
            return Err(ConfigError::Invalid(format!(
                "grid_step must be in (0, 0.5], got {}",
                self.grid_step
            )));
        }
        if !(self.analysis.smoothing > 0.0) {
            return Err(ConfigError::Invalid("analysis.smoothing must be positive".into()));
        }
        if let EmbedderConfig::Hashed { dimension, .. } = self.embedder {
            if dimension < 2 {
                return Err(ConfigError::Invalid("hashed embedder dimension must be >= 2".into()));
            }
        }
        Ok(())
    }

    /// The configured path for `what`, which must exist.
    pub fn require(&self, what: &'static str, path: &Option<PathBuf>) -> Result<PathBuf, ConfigError> {
        let p = path
            .clone()
            .ok_or_else(|| ConfigError::Invalid(format!("paths.{what} is not set")))?;
        if !p.exists() {
            return Err(ConfigError::MissingPath { what, path: p });
        }
        Ok(p)
    }

    /// Hash of every setting except the output directory, so identical runs
    /// into different directories stamp identical headers.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.paths.output_dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        sha256_hex(json.as_bytes())[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            r#"
split_seed = 3
format = "csv"
[paths]
tweets = "data/tweets.jsonl"
output_dir = "/abs/out"
[embedder]
kind = "hashed"
dimension = 32
[train]
max_epochs = 5
"#,
        )
        .unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.split_seed, 3);
        assert_eq!(c.format, ReportFormat::Csv);
        assert_eq!(c.paths.tweets, Some(dir.path().join("data/tweets.jsonl")));
        assert_eq!(c.paths.output_dir, PathBuf::from("/abs/out"));
        assert_eq!(c.train.max_epochs, 5);
        assert_eq!(c.train.batch_size, 128);
        assert_eq!(c.embedder, EmbedderConfig::Hashed { dimension: 32, seed: 0 });
        c.validate().unwrap();
        assert!(c.require("tweets", &c.paths.tweets).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let mut a = RunConfig::default();
        let h = a.config_hash();
        a.paths.output_dir = PathBuf::from("/elsewhere");
        assert_eq!(h, a.config_hash());
        a.split_seed = 1;
        assert_ne!(h, a.config_hash());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::default();
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }
}
