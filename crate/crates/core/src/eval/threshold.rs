use serde::Serialize;

use super::metrics::{check_inputs, class_counts, rates_from_confusion, Confusion};
use super::EvalError;

pub const DEFAULT_GRID_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdCurve {
    /// Ascending, distinct.
    pub grid: Vec<f64>,
    pub f1_at: Vec<f64>,
    pub best_threshold: f64,
    pub best_f1: f64,
}

impl ThresholdCurve {
    pub fn f1_near(&self, threshold: f64) -> Option<f64> {
        let i = self.grid.partition_point(|&t| t < threshold);
        self.grid.get(i).filter(|&&t| t == threshold).map(|_| self.f1_at[i])
    }
}

/// Grid `{step, 2*step, ..., 1 - step}`. When `1/step` is an integer `n` the
/// points are formed as `k/n`, so 0.5 is hit exactly.
pub fn threshold_grid(step: f64) -> Result<Vec<f64>, EvalError> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(EvalError::BadGridStep(step));
    }
    let n = (1.0 / step).round();
    if ((1.0 / step) - n).abs() < 1e-9 {
        let n = n as usize;
        Ok((1..n).map(|k| k as f64 / n as f64).collect())
    } else {
        Ok((1..)
            .map(|k| k as f64 * step)
            .take_while(|&t| t <= 1.0 - step + 1e-12)
            .collect())
    }
}

/// Confusion at `threshold` from class-sorted score lists.
fn confusion_sorted(neg: &[f64], pos: &[f64], threshold: f64) -> Confusion {
    let tn = neg.partition_point(|&s| s < threshold);
    let fn_ = pos.partition_point(|&s| s < threshold);
    Confusion {
        tn,
        fp: neg.len() - tn,
        fn_,
        tp: pos.len() - fn_,
    }
}

/// Maximizes F1 over the step grid plus every distinct score. Ties go to the
/// threshold closest to 0.5, then to the smaller threshold.
pub fn tune_threshold(scores: &[f64], labels: &[u8], grid_step: f64) -> Result<ThresholdCurve, EvalError> {
    check_inputs(scores, labels)?;
    let (n_neg, n_pos) = class_counts(labels);
    if n_neg == 0 || n_pos == 0 {
        return Err(EvalError::SingleClass("threshold tuning"));
    }
    let mut grid = threshold_grid(grid_step)?;
    grid.extend_from_slice(scores);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut neg: Vec<f64> = Vec::with_capacity(n_neg);
    let mut pos: Vec<f64> = Vec::with_capacity(n_pos);
    for (&s, &y) in scores.iter().zip(labels) {
        if y == 1 {
            pos.push(s)
        } else {
            neg.push(s)
        }
    }
    neg.sort_by(f64::total_cmp);
    pos.sort_by(f64::total_cmp);

    let f1_at: Vec<f64> = grid
        .iter()
        .map(|&t| rates_from_confusion(confusion_sorted(&neg, &pos, t)).f1)
        .collect();
    let mut best = 0;
    for i in 1..grid.len() {
        let better =
            f1_at[i] > f1_at[best] || (f1_at[i] == f1_at[best] && (grid[i] - 0.5).abs() < (grid[best] - 0.5).abs());
        if better {
            best = i;
        }
    }
    Ok(ThresholdCurve {
        best_threshold: grid[best],
        best_f1: f1_at[best],
        grid,
        f1_at,
    })
}
