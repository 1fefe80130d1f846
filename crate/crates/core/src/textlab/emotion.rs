use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::TextlabError;
use crate::embed::tokenize;
use crate::tablefile::{read_rows, TableFileError};

pub const EMOTION_CATEGORIES: [&str; 10] = [
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "sadness",
    "surprise",
    "trust",
    "negative",
    "positive",
];

pub fn category_index(name: &str) -> Option<usize> {
    EMOTION_CATEGORIES.iter().position(|c| c.eq_ignore_ascii_case(name))
}

/// Token to category set. Tokens are stored in tokenizer-normal form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmotionLexicon {
    entries: HashMap<String, [bool; 10]>,
}

impl EmotionLexicon {
    pub fn new() -> EmotionLexicon {
        EmotionLexicon::default()
    }

    pub fn insert(&mut self, token: &str, category: usize) {
        let key = tokenize(token)
            .into_iter()
            .next()
            .unwrap_or_else(|| token.to_lowercase());
        self.entries.entry(key).or_default()[category] = true;
    }

    pub fn from_pairs<'a, I>(pairs: I) -> Result<EmotionLexicon, TextlabError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut lex = EmotionLexicon::new();
        for (token, category) in pairs {
            let c = category_index(category).ok_or_else(|| TextlabError::UnknownCategory(category.to_string()))?;
            lex.insert(token, c);
        }
        Ok(lex)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn categories_of(&self, token: &str) -> Option<&[bool; 10]> {
        self.entries.get(token)
    }
}

/// Reads `token,category` rows. A third column, as in the word-level NRC
/// layout, is an association flag; rows flagged `0` are skipped.
pub fn load_emotion_lexicon(path: &Path) -> Result<EmotionLexicon, TextlabError> {
    let mut lex = EmotionLexicon::new();
    for row in read_rows(path, 2, &["token", "category"])? {
        if row.cells.get(2).is_some_and(|flag| flag == "0") {
            continue;
        }
        let c = category_index(&row.cells[1]).ok_or_else(|| {
            TableFileError::format(path, row.line, format!("unknown emotion category {:?}", row.cells[1]))
        })?;
        lex.insert(&row.cells[0], c);
    }
    Ok(lex)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmotionProfile {
    /// Mean over documents, indexed like [`EMOTION_CATEGORIES`].
    pub means: [f64; 10],
    /// One row per document, in input order.
    pub scores: Vec<[f64; 10]>,
}

impl EmotionProfile {
    pub fn category_scores(&self, category: usize) -> Vec<f64> {
        self.scores.iter().map(|s| s[category]).collect()
    }
}

/// Per category: matching tokens over total tokens. Empty documents score 0.
pub fn document_emotions(document: &str, lexicon: &EmotionLexicon) -> [f64; 10] {
    let tokens = tokenize(document);
    let mut hits = [0usize; 10];
    for t in &tokens {
        if let Some(cats) = lexicon.categories_of(t) {
            for (h, &on) in hits.iter_mut().zip(cats) {
                *h += on as usize;
            }
        }
    }
    let n = tokens.len().max(1) as f64;
    hits.map(|h| h as f64 / n)
}

pub fn emotion_profile<S: AsRef<str> + Sync>(
    docs: &[S],
    lexicon: &EmotionLexicon,
) -> Result<EmotionProfile, TextlabError> {
    if lexicon.is_empty() {
        return Err(TextlabError::EmptyLexicon);
    }
    let scores: Vec<[f64; 10]> = docs
        .par_iter()
        .map(|d| document_emotions(d.as_ref(), lexicon))
        .collect();
    let mut means = [0.0; 10];
    if !scores.is_empty() {
        for s in &scores {
            for (m, v) in means.iter_mut().zip(s) {
                *m += v;
            }
        }
        let n = scores.len() as f64;
        means.iter_mut().for_each(|m| *m /= n);
    }
    Ok(EmotionProfile { means, scores })
}
