use serde::Serialize;

use super::EvalError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tp: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }
}

impl std::ops::Add for Confusion {
    type Output = Confusion;
    fn add(self, o: Confusion) -> Confusion {
        Confusion {
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tp: self.tp + o.tp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rates {
    pub confusion: Confusion,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when the denominator was zero and the value was reported as 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

pub(crate) fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<(), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(&l) = labels.iter().find(|&&l| l > 1) {
        return Err(EvalError::BadLabel(l));
    }
    if let Some(&s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EvalError::BadScore(s));
    }
    Ok(())
}

pub(crate) fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    (labels.len() - pos, pos)
}

pub fn confusion_at(scores: &[f64], labels: &[u8], threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

pub fn rates_from_confusion(c: Confusion) -> Rates {
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            (0.0, true)
        } else {
            (num as f64 / den as f64, false)
        }
    };
    let (precision, precision_undefined) = ratio(c.tp, c.tp + c.fp);
    let (recall, recall_undefined) = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Rates {
        confusion: c,
        accuracy: ratio(c.tp + c.tn, c.total()).0,
        precision,
        recall,
        f1,
        precision_undefined,
        recall_undefined,
    }
}

/// Predicts class 1 iff `score >= threshold`.
pub fn confusion_and_rates(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Rates, EvalError> {
    check_inputs(scores, labels)?;
    Ok(rates_from_confusion(confusion_at(scores, labels, threshold)))
}

/// 1-based ranks with ties sharing their mean rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half; computed from the rank sum of the positives.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    check_inputs(scores, labels)?;
    let (n_neg, n_pos) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass("ROC-AUC"));
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &y)| y == 1).map(|(r, _)| r).sum();
    let n_pos = n_pos as f64;
    Ok((rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg as f64))
}

/// Average precision: sum over descending score cuts of
/// `(R_k - R_{k-1}) * P_k`, equal scores forming a single cut.
pub fn prc_auc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    check_inputs(scores, labels)?;
    let (_, n_pos) = class_counts(labels);
    if n_pos == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let cut = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == cut {
            if labels[idx[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub slice_id: String,
    pub n_class0: usize,
    pub n_class1: usize,
    /// `None` marks a metric that is undefined for this slice.
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub roc_auc: Option<f64>,
    pub prc_auc: Option<f64>,
    pub confusion: Confusion,
    pub threshold_used: f64,
}

impl MetricsReport {
    /// Full report for a slice. Empty slices carry no metrics; single-class
    /// slices carry accuracy only.
    pub fn compute(slice_id: &str, scores: &[f64], labels: &[u8], threshold: f64) -> Result<MetricsReport, EvalError> {
        let (n_class0, n_class1) = class_counts(labels);
        let mut report = MetricsReport {
            slice_id: slice_id.to_string(),
            n_class0,
            n_class1,
            accuracy: None,
            precision: None,
            recall: None,
            f1: None,
            roc_auc: None,
            prc_auc: None,
            confusion: Confusion::default(),
            threshold_used: threshold,
        };
        if scores.is_empty() && labels.is_empty() {
            return Ok(report);
        }
        let rates = confusion_and_rates(scores, labels, threshold)?;
        report.confusion = rates.confusion;
        report.accuracy = Some(rates.accuracy);
        if n_class0 > 0 && n_class1 > 0 {
            report.precision = Some(rates.precision);
            report.recall = Some(rates.recall);
            report.f1 = Some(rates.f1);
            report.roc_auc = Some(roc_auc(scores, labels)?);
            report.prc_auc = Some(prc_auc(scores, labels)?);
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_counted_confusion() {
        let r = confusion_and_rates(&[0.9, 0.7, 0.4, 0.2], &[1, 0, 1, 0], 0.5).unwrap();
        assert_eq!(
            r.confusion,
            Confusion {
                tn: 1,
                fp: 1,
                fn_: 1,
                tp: 1
            }
        );
        assert_eq!((r.precision, r.recall, r.f1, r.accuracy), (0.5, 0.5, 0.5, 0.5));
    }

    #[test]
    fn perfect_scores() {
        let r = confusion_and_rates(&[0.9, 0.8, 0.3, 0.1], &[1, 1, 0, 0], 0.55).unwrap();
        assert_eq!(r.f1, 1.0);
    }

    #[test]
    fn threshold_is_inclusive() {
        let r = confusion_and_rates(&[0.5], &[1], 0.5).unwrap();
        assert_eq!(r.confusion.tp, 1);
    }

    #[test]
    fn all_negative_predictions_flag_precision() {
        let r = confusion_and_rates(&[0.1, 0.2, 0.3], &[1, 0, 1], 0.9).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        assert!(r.precision_undefined);
        assert!(!r.recall_undefined);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            confusion_and_rates(&[0.1, 0.2], &[1], 0.5),
            Err(EvalError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn roc_examples() {
        // positives {0.8, 0.3}, negatives {0.6, 0.5}: 2 wins of 4 pairs
        assert_eq!(roc_auc(&[0.8, 0.3, 0.6, 0.5], &[1, 1, 0, 0]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.4; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), 0.5);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(EvalError::SingleClass(_))));
    }

    #[test]
    fn prc_examples() {
        assert_eq!(prc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        // single positive ranked first of four: one recall step at precision 1
        assert_eq!(prc_auc(&[0.9, 0.5, 0.4, 0.1], &[1, 0, 0, 0]).unwrap(), 1.0);
        // positive ranked second: step at precision 1/2
        assert_eq!(prc_auc(&[0.9, 0.5, 0.4, 0.1], &[0, 1, 0, 0]).unwrap(), 0.5);
        // all tied: one cut at prevalence
        assert_eq!(prc_auc(&[0.3; 4], &[1, 0, 0, 0]).unwrap(), 0.25);
        assert!(matches!(prc_auc(&[0.1, 0.2], &[0, 0]), Err(EvalError::NoPositives)));
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn report_single_class_has_accuracy_only() {
        let r = MetricsReport::compute("w", &[0.9, 0.2], &[1, 1], 0.5).unwrap();
        assert_eq!(r.accuracy, Some(0.5));
        assert!(r.roc_auc.is_none() && r.f1.is_none() && r.prc_auc.is_none());
        let r = MetricsReport::compute("w", &[], &[], 0.5).unwrap();
        assert!(r.accuracy.is_none());
    }

    fn scores_and_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..1.0, n),
                proptest::collection::vec(0u8..2, n),
            )
        })
    }

    proptest! {
        #[test]
        fn roc_complement((scores, mut labels) in scores_and_labels()) {
            labels[0] = 0;
            labels[1] = 1;
            let mut sorted = scores.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[0] != w[1]));
            let flipped: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
            let a = roc_auc(&scores, &labels).unwrap();
            let b = roc_auc(&flipped, &labels).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn roc_monotone_invariant((scores, mut labels) in scores_and_labels()) {
            labels[0] = 0;
            labels[1] = 1;
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            prop_assert_eq!(roc_auc(&scores, &labels).unwrap(), roc_auc(&transformed, &labels).unwrap());
        }

        #[test]
        fn confusion_totals((scores, labels) in scores_and_labels(), t in 0.0f64..1.0) {
            let r = confusion_and_rates(&scores, &labels, t).unwrap();
            let c = r.confusion;
            prop_assert_eq!(c.total(), labels.len());
            prop_assert!((r.accuracy - (c.tp + c.tn) as f64 / c.total() as f64).abs() < 1e-15);
        }
    }
}
