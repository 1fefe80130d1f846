//! Corpus analysis: class-conditional word frequencies, lexicon emotion
//! profiles, moral-foundation bias and intensity along word-vector axes, and
//! Mann-Whitney U comparisons between the classes.

mod compare;
mod emotion;
mod frameaxis;
mod frequency;
mod mwu;

use thiserror::Error;

use crate::tablefile::TableFileError;

pub use compare::{
    class_comparison_report, comparison_table, median, ComparisonRow, Direction, COMPARISON_COLUMNS, DEFAULT_ALPHA,
};
pub use emotion::{
    category_index, document_emotions, emotion_profile, load_emotion_lexicon, EmotionLexicon, EmotionProfile,
    EMOTION_CATEGORIES,
};
pub use frameaxis::{
    background_bias, background_biases, frameaxis_profiles, frameaxis_scores, load_axes, load_axis_words, MoralAxis,
    MoralProfile, MORAL_FOUNDATIONS,
};
pub use frequency::{frequency_compare, FrequencyComparison, TokenFrequency, DEFAULT_SMOOTHING};
pub use mwu::{mann_whitney_u, mann_whitney_u_with, UMethod, UTest, EXACT_LIMIT, EXACT_MAX_N};

#[derive(Debug, Error)]
pub enum TextlabError {
    #[error("{0} corpus has no tokens")]
    EmptyCorpus(&'static str),
    #[error("emotion lexicon is empty")]
    EmptyLexicon,
    #[error("unknown emotion category {0:?}")]
    UnknownCategory(String),
    #[error("axis {foundation}: {reason}")]
    ZeroAxis { foundation: String, reason: String },
    #[error("axis {foundation}: {word:?} is on both poles")]
    OverlappingPoles { foundation: String, word: String },
    #[error("no token of the corpus has a word vector")]
    NoInVocabulary,
    #[error("U test needs two non-empty samples")]
    EmptySample,
    #[error("non-finite value {0} in U test sample")]
    NonFinite(f64),
    #[error("exact U test limited to {EXACT_LIMIT} observations, got {0}")]
    ExactTooLarge(usize),
    #[error("{0}")]
    BadParameter(String),
    #[error(transparent)]
    File(#[from] TableFileError),
}
