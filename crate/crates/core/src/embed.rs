//! Tokenization and document embedders.
//!
//! Two embedders ship: the mean of pretrained word vectors read from a text
//! vector file, and a seeded feature-hashing embedder that needs no external
//! data. Both implement [`Embedder`], which is all the rest of the pipeline
//! sees; any other sentence encoder can be dropped in behind the same trait.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::sha256_hex;

pub const URL_TOKEN: &str = "<url>";
pub const USER_TOKEN: &str = "<user>";

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot read vector file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("hashed embedder needs dimension >= 2, got {0}")]
    BadDimension(usize),
}

fn is_url(token: &str) -> bool {
    token.starts_with("http://") || token.starts_with("https://") || token.starts_with("www.")
}

fn normalize_token(raw: &str) -> Option<String> {
    if raw == URL_TOKEN || raw == USER_TOKEN {
        return Some(raw.to_string());
    }
    let lower = raw.to_lowercase();
    if is_url(&lower) {
        return Some(URL_TOKEN.to_string());
    }
    if let Some(handle) = lower.strip_prefix('@') {
        if handle.chars().any(char::is_alphanumeric) {
            return Some(USER_TOKEN.to_string());
        }
    }
    let kept: String = lower.chars().filter(|c| c.is_alphanumeric() || *c == '#').collect();
    if kept.chars().all(|c| c == '#') {
        None
    } else {
        Some(kept)
    }
}

/// Lowercases, maps URLs to `<url>` and mentions to `<user>`, keeps hashtags
/// with their `#`, strips other punctuation and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().filter_map(normalize_token).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub source: String,
    /// Tokens that contributed; zero means the vector is the all-zero fallback.
    pub covered_tokens: usize,
}

impl EmbeddingVector {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn is_fallback(&self) -> bool {
        self.covered_tokens == 0
    }
}

#[derive(Debug, Clone)]
pub struct WordVectorTable {
    dimension: usize,
    entries: HashMap<String, Vec<f64>>,
    fingerprint: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub duplicates: usize,
}

impl WordVectorTable {
    /// Builds a table from in-memory entries; tokens are lowercased and the
    /// first occurrence of a token wins.
    pub fn from_entries<I>(dimension: usize, entries: I) -> WordVectorTable
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut map = HashMap::new();
        let mut fp = Vec::new();
        for (token, vector) in entries {
            assert_eq!(vector.len(), dimension, "vector for {token} has wrong dimension");
            let token = token.to_lowercase();
            if map.contains_key(&token) {
                continue;
            }
            fp.extend_from_slice(token.as_bytes());
            for v in &vector {
                fp.extend_from_slice(&v.to_le_bytes());
            }
            map.insert(token, vector);
        }
        WordVectorTable {
            dimension,
            entries: map,
            fingerprint: sha256_hex(&fp)[..16].to_string(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

/// Reads `token v1 ... vd` lines with an optional leading `count dim` header.
pub fn load_vectors(path: &Path) -> Result<(WordVectorTable, LoadStats), EmbedError> {
    let text = fs::read_to_string(path).map_err(|source| EmbedError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let format_err = |line: usize, message: String| EmbedError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut dimension: Option<usize> = None;
    let mut entries: HashMap<String, Vec<f64>> = HashMap::new();
    let mut stats = LoadStats::default();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if idx == 0 && fields.len() == 2 {
            if let (Ok(_count), Ok(dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                if dim == 0 {
                    return Err(format_err(line_no, "header declares dimension 0".into()));
                }
                dimension = Some(dim);
                continue;
            }
        }
        let token = fields[0].to_lowercase();
        let vector = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format_err(line_no, format!("non-numeric component {f:?}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let dim = *dimension.get_or_insert(vector.len());
        if vector.len() != dim || dim == 0 {
            return Err(format_err(
                line_no,
                format!("expected {dim} components, found {}", vector.len()),
            ));
        }
        if entries.contains_key(&token) {
            log::warn!(
                "{}:{line_no}: duplicate token {token:?}; first vector kept",
                path.display()
            );
            stats.duplicates += 1;
            continue;
        }
        entries.insert(token, vector);
    }
    let dimension = dimension.ok_or_else(|| format_err(0, "no vectors".into()))?;
    let fingerprint = sha256_hex(text.as_bytes())[..16].to_string();
    Ok((
        WordVectorTable {
            dimension,
            entries,
            fingerprint,
        },
        stats,
    ))
}

/// Mean of the in-vocabulary token vectors; zero vector when none match.
pub fn embed_document(document: &str, table: &WordVectorTable) -> EmbeddingVector {
    let mut sum = vec![0.0; table.dimension];
    let mut covered = 0usize;
    for token in tokenize(document) {
        if let Some(v) = table.get(&token) {
            covered += 1;
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
        }
    }
    if covered > 0 {
        let n = covered as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    EmbeddingVector {
        values: sum,
        source: wordvec_id(table),
        covered_tokens: covered,
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Bucket index and sign for a token; stable across platforms and releases.
pub fn hash_token(token: &str, dimension: usize, seed: u64) -> (usize, f64) {
    let h = splitmix64(fnv1a(token.as_bytes()) ^ splitmix64(seed));
    let index = (h % dimension as u64) as usize;
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (index, sign)
}

/// Signed hashed token counts, L2-normalized.
pub fn embed_document_hashed(document: &str, dimension: usize, seed: u64) -> EmbeddingVector {
    assert!(dimension >= 2, "hashed embedder needs dimension >= 2");
    let mut values = vec![0.0; dimension];
    let tokens = tokenize(document);
    for token in &tokens {
        let (i, sign) = hash_token(token, dimension, seed);
        values[i] += sign;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    EmbeddingVector {
        values,
        source: hashed_id(dimension, seed),
        covered_tokens: if norm > 0.0 { tokens.len() } else { 0 },
    }
}

fn hashed_id(dimension: usize, seed: u64) -> String {
    format!("hashed:d={dimension}:seed={seed}")
}

fn wordvec_id(table: &WordVectorTable) -> String {
    format!("wordvec:d={}:{}", table.dimension, table.fingerprint)
}

pub trait Embedder: Send + Sync {
    /// Identifies the embedder and its parameters; stored in model files.
    fn id(&self) -> String;
    fn dimension(&self) -> usize;
    fn embed(&self, document: &str) -> EmbeddingVector;
}

pub struct HashedEmbedder {
    dimension: usize,
    seed: u64,
}

impl HashedEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Result<HashedEmbedder, EmbedError> {
        if dimension < 2 {
            return Err(EmbedError::BadDimension(dimension));
        }
        Ok(HashedEmbedder { dimension, seed })
    }
}

impl Embedder for HashedEmbedder {
    fn id(&self) -> String {
        hashed_id(self.dimension, self.seed)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, document: &str) -> EmbeddingVector {
        embed_document_hashed(document, self.dimension, self.seed)
    }
}

pub struct WordVectorEmbedder {
    table: WordVectorTable,
}

impl WordVectorEmbedder {
    pub fn new(table: WordVectorTable) -> WordVectorEmbedder {
        WordVectorEmbedder { table }
    }

    pub fn table(&self) -> &WordVectorTable {
        &self.table
    }
}

impl Embedder for WordVectorEmbedder {
    fn id(&self) -> String {
        wordvec_id(&self.table)
    }

    fn dimension(&self) -> usize {
        self.table.dimension
    }

    fn embed(&self, document: &str) -> EmbeddingVector {
        embed_document(document, &self.table)
    }
}

/// Embedder selection as it appears in the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderConfig {
    Wordvec {
        vectors: PathBuf,
    },
    Hashed {
        #[serde(default = "default_hashed_dimension")]
        dimension: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_hashed_dimension() -> usize {
    64
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Hashed {
            dimension: default_hashed_dimension(),
            seed: 0,
        }
    }
}

impl EmbedderConfig {
    pub fn build(&self) -> Result<Box<dyn Embedder>, EmbedError> {
        match self {
            EmbedderConfig::Hashed { dimension, seed } => Ok(Box::new(HashedEmbedder::new(*dimension, *seed)?)),
            EmbedderConfig::Wordvec { vectors } => {
                let (table, stats) = load_vectors(vectors)?;
                if stats.duplicates > 0 {
                    log::warn!("{} duplicate token(s) in {}", stats.duplicates, vectors.display());
                }
                Ok(Box::new(WordVectorEmbedder::new(table)))
            }
        }
    }
}

/// Embeds documents in parallel; output order follows input order.
pub fn embed_all(embedder: &dyn Embedder, documents: &[&str]) -> Vec<EmbeddingVector> {
    documents.par_iter().map(|d| embedder.embed(d)).collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
