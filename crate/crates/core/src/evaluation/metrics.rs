use serde::{Deserialize, Serialize};

use crate::data::MALWARE;
use crate::evaluation::EvalError;

/// Confusion counts with malware as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == MALWARE, p == MALWARE) {
            (true, true) => cm.tp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fp += 1,
            (true, false) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// The six reported metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
    pub mcc: f64,
}

/// Every metric except ROC-AUC, which needs scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
}

impl ConfusionMetrics {
    pub fn with_roc_auc(self, roc_auc: f64) -> MetricSet {
        MetricSet {
            accuracy: self.accuracy,
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
            roc_auc,
            mcc: self.mcc,
        }
    }
}

fn ratio(num: f64, den: f64, what: &str) -> f64 {
    if den == 0.0 {
        log::debug!("{what}: 0/0 defined as 0");
        0.0
    } else {
        num / den
    }
}

/// Precision, recall, F1, accuracy and MCC; any 0/0 is defined as 0.
pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> ConfusionMetrics {
    let (tp, tn, fp, fn_) = (cm.tp as f64, cm.tn as f64, cm.fp as f64, cm.fn_ as f64);
    let precision = ratio(tp, tp + fp, "precision");
    let recall = ratio(tp, tp + fn_, "recall");
    let f1 = ratio(2.0 * precision * recall, precision + recall, "f1");
    let accuracy = ratio(tp + tn, tp + tn + fp + fn_, "accuracy");
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    let mcc = ratio(tp * tn - fp * fn_, den, "mcc").clamp(-1.0, 1.0);
    ConfusionMetrics {
        accuracy,
        precision,
        recall,
        f1,
        mcc,
    }
}

/// Mann-Whitney AUC: P(score_pos > score_neg) + P(tie) / 2.
pub fn roc_auc(y_true: &[u8], scores: &[f64]) -> Result<f64, EvalError> {
    if y_true.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            left: y_true.len(),
            right: scores.len(),
        });
    }
    let n_pos = y_true.iter().filter(|&&y| y == MALWARE).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of mid-ranks (1-based) of the positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_group = order[i..=j].iter().filter(|&&r| y_true[r] == MALWARE).count();
        rank_sum += mid * pos_in_group as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// All six metrics from labels, hard predictions and scores.
pub fn metric_set(y_true: &[u8], y_pred: &[u8], scores: &[f64]) -> Result<(ConfusionMatrix, MetricSet), EvalError> {
    let cm = confusion(y_true, y_pred)?;
    let auc = roc_auc(y_true, scores)?;
    Ok((cm, metrics_from_confusion(&cm).with_roc_auc(auc)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn confusion_examples() {
        let cm = confusion(&[1, 0, 0, 1], &[1, 1, 0, 1]).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 2, tn: 1, fp: 1, fn_: 0 });
        let cm = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((cm.fp, cm.fn_), (0, 0));
        let cm = confusion(&[1, 0, 1], &[0, 1, 0]).unwrap();
        assert_eq!((cm.tp, cm.tn), (0, 0));
        assert!(confusion(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn worked_metric_values() {
        let m = metrics_from_confusion(&ConfusionMatrix { tp: 1, tn: 2, fp: 1, fn_: 0 });
        assert!((m.mcc - 2.0 / 12f64.sqrt()).abs() < 1e-12);
        let m = metrics_from_confusion(&ConfusionMatrix { tp: 2, tn: 0, fp: 1, fn_: 1 });
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
        let m = metrics_from_confusion(&ConfusionMatrix { tp: 3, tn: 4, fp: 0, fn_: 0 });
        assert_eq!((m.f1, m.mcc, m.accuracy), (1.0, 1.0, 1.0));
    }

    #[test]
    fn zero_over_zero_is_zero() {
        let m = metrics_from_confusion(&ConfusionMatrix { tp: 0, tn: 5, fp: 0, fn_: 0 });
        assert_eq!((m.precision, m.recall, m.f1, m.mcc), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0, 0, 1, 1], &[0.1, 0.2, 0.3, 0.4]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0, 1, 0, 1], &[0.5; 4]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[1, 1, 0], &[0.9, 0.4, 0.5]).unwrap(), 0.5);
        assert!(matches!(roc_auc(&[1, 1], &[0.1, 0.2]), Err(EvalError::SingleClass)));
    }

    fn brute_auc(y: &[u8], s: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] == 1 && y[j] == 0 {
                    den += 1.0;
                    if s[i] > s[j] {
                        num += 1.0;
                    } else if s[i] == s[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_count(
            pairs in prop::collection::vec((0u8..2, 0u8..6), 2..40)
        ) {
            let y: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            let s: Vec<f64> = pairs.iter().map(|p| f64::from(p.1) / 5.0).collect();
            prop_assume!(y.contains(&0) && y.contains(&1));
            let auc = roc_auc(&y, &s).unwrap();
            prop_assert!((auc - brute_auc(&y, &s)).abs() < 1e-12);
            // strictly increasing transform leaves the AUC unchanged
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            prop_assert!((roc_auc(&y, &t).unwrap() - auc).abs() < 1e-12);
        }

        #[test]
        fn inversion_identities(
            pairs in prop::collection::vec((0u8..2, 0u8..2), 1..60)
        ) {
            let y: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            let p: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            let inv: Vec<u8> = p.iter().map(|v| 1 - v).collect();
            let a = metrics_from_confusion(&confusion(&y, &p).unwrap());
            let b = metrics_from_confusion(&confusion(&y, &inv).unwrap());
            prop_assert!((a.mcc + b.mcc).abs() < 1e-12);
            prop_assert!((a.accuracy + b.accuracy - 1.0).abs() < 1e-12);
            for v in [a.accuracy, a.precision, a.recall, a.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((-1.0..=1.0).contains(&a.mcc));
        }
    }
}
