use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::TextlabError;
use crate::embed::{tokenize, WordVectorTable};
use crate::tablefile::{read_rows, TableFileError};

pub const MORAL_FOUNDATIONS: [&str; 5] = ["loyalty", "care", "sanctity", "authority", "fairness"];

/// Direction from the negative-pole centroid to the positive-pole centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct MoralAxis {
    pub foundation: String,
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    vector: Vec<f64>,
    norm: f64,
}

fn centroid(words: &[String], table: &WordVectorTable) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; table.dimension()];
    let mut n = 0usize;
    for w in words {
        if let Some(v) = table.get(&w.to_lowercase()) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            n += 1;
        }
    }
    (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl MoralAxis {
    /// Pole words missing from `table` are skipped; a pole with no known
    /// words, overlapping poles, or a zero axis are errors.
    pub fn new(
        foundation: &str,
        positive: Vec<String>,
        negative: Vec<String>,
        table: &WordVectorTable,
    ) -> Result<MoralAxis, TextlabError> {
        let pos: BTreeSet<String> = positive.iter().map(|w| w.to_lowercase()).collect();
        if let Some(w) = negative.iter().map(|w| w.to_lowercase()).find(|w| pos.contains(w)) {
            return Err(TextlabError::OverlappingPoles {
                foundation: foundation.to_string(),
                word: w,
            });
        }
        let zero = |why: &str| TextlabError::ZeroAxis {
            foundation: foundation.to_string(),
            reason: why.to_string(),
        };
        let p = centroid(&positive, table).ok_or_else(|| zero("no positive-pole word has a vector"))?;
        let n = centroid(&negative, table).ok_or_else(|| zero("no negative-pole word has a vector"))?;
        let vector: Vec<f64> = p.iter().zip(&n).map(|(a, b)| a - b).collect();
        let mut axis = MoralAxis::from_vector(foundation, vector)?;
        axis.positive = positive;
        axis.negative = negative;
        Ok(axis)
    }

    pub fn from_vector(foundation: &str, vector: Vec<f64>) -> Result<MoralAxis, TextlabError> {
        let n = norm(&vector);
        if !(n > 0.0 && n.is_finite()) {
            return Err(TextlabError::ZeroAxis {
                foundation: foundation.to_string(),
                reason: "pole centroids coincide".to_string(),
            });
        }
        Ok(MoralAxis {
            foundation: foundation.to_string(),
            positive: Vec::new(),
            negative: Vec::new(),
            vector,
            norm: n,
        })
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    /// Poles swapped, vector negated.
    pub fn flipped(&self) -> MoralAxis {
        MoralAxis {
            foundation: self.foundation.clone(),
            positive: self.negative.clone(),
            negative: self.positive.clone(),
            vector: self.vector.iter().map(|x| -x).collect(),
            norm: self.norm,
        }
    }

    /// Cosine with `v`, 0 for a zero vector.
    pub fn cosine(&self, v: &[f64]) -> f64 {
        let nv = norm(v);
        if nv == 0.0 {
            return 0.0;
        }
        let dot: f64 = v.iter().zip(&self.vector).map(|(a, b)| a * b).sum();
        (dot / (nv * self.norm)).clamp(-1.0, 1.0)
    }
}

/// Pole seed lists from `foundation,pole,word` rows, pole `+` or `-`.
/// Foundations keep their first-appearance order.
/// Foundation name with its positive and negative pole words.
pub type AxisWords = (String, Vec<String>, Vec<String>);

pub fn load_axis_words(path: &Path) -> Result<Vec<AxisWords>, TextlabError> {
    let mut order: Vec<String> = Vec::new();
    let mut poles: BTreeMap<String, (Vec<String>, Vec<String>)> = BTreeMap::new();
    for row in read_rows(path, 3, &["foundation", "pole", "word"])? {
        let foundation = row.cells[0].to_lowercase();
        let entry = poles.entry(foundation.clone()).or_insert_with(|| {
            order.push(foundation.clone());
            Default::default()
        });
        match row.cells[1].as_str() {
            "+" => entry.0.push(row.cells[2].clone()),
            "-" => entry.1.push(row.cells[2].clone()),
            other => {
                return Err(
                    TableFileError::format(path, row.line, format!("pole must be + or -, got {other:?}")).into(),
                )
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|f| {
            let (p, n) = poles.remove(&f).unwrap_or_default();
            (f, p, n)
        })
        .collect())
}

pub fn load_axes(path: &Path, table: &WordVectorTable) -> Result<Vec<MoralAxis>, TextlabError> {
    load_axis_words(path)?
        .into_iter()
        .map(|(f, p, n)| MoralAxis::new(&f, p, n, table))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoralProfile {
    /// One entry per axis, in axis order.
    pub bias: Vec<f64>,
    pub intensity: Vec<f64>,
    pub in_vocab_tokens: usize,
    /// No token of the document had a vector; bias and intensity are 0.
    pub no_in_vocab: bool,
}

/// In-vocabulary token counts, ordered for a fixed summation order.
fn vocab_counts<'t>(doc: &str, table: &'t WordVectorTable) -> Vec<(f64, &'t [f64])> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in tokenize(doc) {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .filter_map(|(t, c)| table.get(&t).map(|v| (c as f64, v)))
        .collect()
}

/// bias = Σ c·cos / Σ c, intensity = Σ c·(cos − background)² / Σ c, over the
/// document's in-vocabulary tokens with raw counts c.
pub fn frameaxis_scores(
    doc: &str,
    axes: &[MoralAxis],
    table: &WordVectorTable,
    background_bias: &[f64],
) -> Result<MoralProfile, TextlabError> {
    if background_bias.len() != axes.len() {
        return Err(TextlabError::BadParameter(format!(
            "{} background values for {} axes",
            background_bias.len(),
            axes.len()
        )));
    }
    let words = vocab_counts(doc, table);
    let total: f64 = words.iter().map(|(c, _)| c).sum();
    if words.is_empty() {
        return Ok(MoralProfile {
            bias: vec![0.0; axes.len()],
            intensity: vec![0.0; axes.len()],
            in_vocab_tokens: 0,
            no_in_vocab: true,
        });
    }
    let mut bias = Vec::with_capacity(axes.len());
    let mut intensity = Vec::with_capacity(axes.len());
    for (axis, &bg) in axes.iter().zip(background_bias) {
        let (mut b, mut i) = (0.0, 0.0);
        for &(c, v) in &words {
            let cos = axis.cosine(v);
            b += c * cos;
            i += c * (cos - bg) * (cos - bg);
        }
        bias.push((b / total).clamp(-1.0, 1.0));
        intensity.push(i / total);
    }
    Ok(MoralProfile {
        bias,
        intensity,
        in_vocab_tokens: total as usize,
        no_in_vocab: false,
    })
}

/// Token-count-weighted mean cosine over the pooled corpus.
pub fn background_bias<S: AsRef<str> + Sync>(
    corpus: &[S],
    axis: &MoralAxis,
    table: &WordVectorTable,
) -> Result<f64, TextlabError> {
    if corpus.is_empty() {
        return Err(TextlabError::EmptyCorpus("background"));
    }
    let parts: Vec<(f64, f64)> = corpus
        .par_iter()
        .map(|d| {
            vocab_counts(d.as_ref(), table)
                .iter()
                .fold((0.0, 0.0), |(s, n), &(c, v)| (s + c * axis.cosine(v), n + c))
        })
        .collect();
    let (sum, n) = parts.iter().fold((0.0, 0.0), |(s, n), &(a, b)| (s + a, n + b));
    if n == 0.0 {
        return Err(TextlabError::NoInVocabulary);
    }
    Ok((sum / n).clamp(-1.0, 1.0))
}

pub fn background_biases<S: AsRef<str> + Sync>(
    corpus: &[S],
    axes: &[MoralAxis],
    table: &WordVectorTable,
) -> Result<Vec<f64>, TextlabError> {
    axes.iter().map(|a| background_bias(corpus, a, table)).collect()
}

/// Scores every document; order preserved.
pub fn frameaxis_profiles<S: AsRef<str> + Sync>(
    docs: &[S],
    axes: &[MoralAxis],
    table: &WordVectorTable,
    background: &[f64],
) -> Result<Vec<MoralProfile>, TextlabError> {
    docs.par_iter()
        .map(|d| frameaxis_scores(d.as_ref(), axes, table, background))
        .collect()
}
