//! Classification metrics, F1-optimal threshold tuning and the per-window
//! (temporal gap) evaluation report.

mod metrics;
mod report;
mod threshold;

use thiserror::Error;

use crate::corpus::WindowSpec;
use crate::model::{MlpParameters, ModelError};

pub use metrics::{
    confusion_and_rates, confusion_at, midranks, prc_auc, rates_from_confusion, roc_auc, Confusion, MetricsReport,
    Rates,
};
pub use report::{
    csv_table, overall_table_csv, overall_table_text, text_table, threshold_curve_csv, window_table_csv,
    window_table_text, WINDOW_TABLE_COLUMNS,
};
pub use threshold::{threshold_grid, tune_threshold, ThresholdCurve, DEFAULT_GRID_STEP};

pub const ALL_WINDOWS: &str = "All Windows";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no samples to evaluate")]
    Empty,
    #[error("labels must be 0 or 1, found {0}")]
    BadLabel(u8),
    #[error("non-finite score {0}")]
    BadScore(f64),
    #[error("{0} is undefined when only one class is present")]
    SingleClass(&'static str),
    #[error("PRC-AUC is undefined without positive samples")]
    NoPositives,
    #[error("grid step must be in (0, 0.5], got {0}")]
    BadGridStep(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowedScore {
    pub window: WindowSpec,
    pub score: f64,
    pub label: u8,
}

/// One pooled "All Windows" row followed by one row per window in gap order.
/// Windows without samples still get a row, with every metric unavailable.
pub fn evaluate_windows(scores: &[WindowedScore], threshold: f64) -> Result<Vec<MetricsReport>, EvalError> {
    let split = |filter: &dyn Fn(&WindowedScore) -> bool| -> (Vec<f64>, Vec<u8>) {
        scores.iter().filter(|s| filter(s)).map(|s| (s.score, s.label)).unzip()
    };
    let (all_s, all_l) = split(&|_| true);
    let mut rows = vec![MetricsReport::compute(ALL_WINDOWS, &all_s, &all_l, threshold)?];
    for window in WindowSpec::all() {
        let (s, l) = split(&|x| x.window == window);
        rows.push(MetricsReport::compute(&window.to_string(), &s, &l, threshold)?);
    }
    Ok(rows)
}

/// Scores window-tagged embeddings with `model` (inference mode) and
/// evaluates them at `threshold`.
pub fn evaluate_by_window(
    model: &MlpParameters,
    samples: &[(WindowSpec, &[f64], u8)],
    threshold: f64,
) -> Result<Vec<MetricsReport>, EvalError> {
    let scored = samples
        .iter()
        .map(|&(window, x, label)| {
            Ok(WindowedScore {
                window,
                score: model.predict_p1(x)?,
                label,
            })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    evaluate_windows(&scored, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_samples_give_identical_rows() {
        let base = [(0.9, 1u8), (0.2, 0u8), (0.6, 0u8), (0.7, 1u8), (0.4, 1u8)];
        let scores: Vec<WindowedScore> = WindowSpec::all()
            .iter()
            .flat_map(|&window| {
                base.iter()
                    .map(move |&(score, label)| WindowedScore { window, score, label })
            })
            .collect();
        let rows = evaluate_windows(&scores, 0.5).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].slice_id, ALL_WINDOWS);
        for r in &rows[2..] {
            let mut a = r.clone();
            a.slice_id.clear();
            let mut b = rows[1].clone();
            b.slice_id.clear();
            assert_eq!(a, b);
        }
        let pooled = rows[1..].iter().fold(Confusion::default(), |acc, r| acc + r.confusion);
        assert_eq!(pooled, rows[0].confusion);
    }

    #[test]
    fn empty_and_single_class_windows() {
        let w = WindowSpec::all();
        let scores = vec![
            WindowedScore {
                window: w[0],
                score: 0.8,
                label: 1,
            },
            WindowedScore {
                window: w[0],
                score: 0.3,
                label: 0,
            },
            WindowedScore {
                window: w[1],
                score: 0.3,
                label: 1,
            },
        ];
        let rows = evaluate_windows(&scores, 0.5).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[1].roc_auc, Some(1.0));
        assert_eq!(rows[2].accuracy, Some(0.0));
        assert!(rows[2].roc_auc.is_none());
        assert!(rows[3].accuracy.is_none());
        assert_eq!((rows[3].n_class0, rows[3].n_class1), (0, 0));
    }
}
