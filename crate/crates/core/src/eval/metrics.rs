use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Outcome counts with defective as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

pub fn confusion(predictions: &[Label], labels: &[Label]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Input("confusion matrix needs at least one prediction".into()));
    }
    let mut m = ConfusionMatrix::default();
    for (p, l) in predictions.iter().zip(labels) {
        match (p.is_defective(), l.is_defective()) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    Ok(m)
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `tp / (tp + fp)`; `None` when nothing was predicted defective.
pub fn precision(m: &ConfusionMatrix) -> Option<f64> {
    ratio(m.tp, m.tp + m.fp)
}

/// `tp / (tp + fn)`; `None` when nothing is actually defective.
pub fn recall(m: &ConfusionMatrix) -> Option<f64> {
    ratio(m.tp, m.tp + m.fn_)
}

/// Harmonic mean of precision and recall, with undefined parts read as 0;
/// `None` when both are 0.
pub fn f_measure(m: &ConfusionMatrix) -> Option<f64> {
    let (p, r) = (precision(m).unwrap_or(0.0), recall(m).unwrap_or(0.0));
    (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
}

/// Mann–Whitney estimate of P(score of a defective file > score of a clean
/// one), ties counted ½.
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Contract(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Input("AUC scores must not be NaN".into()));
    }
    let n_pos = labels.iter().filter(|l| l.is_defective()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Input("AUC is undefined unless both classes are present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the midrank of each tie group keeps the sum integral.
    let mut rank_sum2 = 0u128;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let twice_mid = (start + 1 + end) as u128;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i].is_defective()).count() as u128;
        rank_sum2 += twice_mid * pos_in_group;
        start = end;
    }
    let (np, nn) = (n_pos as u128, n_neg as u128);
    let u2 = rank_sum2 - np * (np + 1);
    Ok(u2 as f64 / (2.0 * (np * nn) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(bits: &[u8]) -> Vec<Label> {
        bits.iter().map(|&b| Label::from_bit(b).unwrap()).collect()
    }

    #[test]
    fn confusion_cases() {
        let m = confusion(&labels(&[1, 1, 0, 0]), &labels(&[1, 0, 1, 0])).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (1, 1, 1, 1));
        assert!(confusion(&labels(&[1]), &labels(&[1, 0])).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn ratios() {
        let m = ConfusionMatrix { tp: 8, fp: 2, fn_: 2, tn: 0 };
        assert!((precision(&m).unwrap() - 0.8).abs() < 1e-15);
        assert!((recall(&m).unwrap() - 0.8).abs() < 1e-15);
        assert!((f_measure(&m).unwrap() - 0.8).abs() < 1e-15);
        let none = ConfusionMatrix { tp: 0, fp: 0, fn_: 3, tn: 1 };
        assert_eq!(precision(&none), None);
        let half = ConfusionMatrix { tp: 1, fp: 0, fn_: 1, tn: 0 };
        assert!((f_measure(&half).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.4, 0.6, 0.1], &labels(&[1, 0, 1, 0])).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.4, 0.6, 0.1], &labels(&[1, 1, 0, 0])).unwrap(), 0.75);
        assert_eq!(auc(&[0.9, 0.4, 0.6, 0.1], &labels(&[0, 0, 1, 1])).unwrap(), 0.25);
        assert_eq!(auc(&[0.9, 0.4, 0.6, 0.1], &labels(&[0, 1, 0, 1])).unwrap(), 0.0);
        assert_eq!(auc(&[0.3; 6], &labels(&[1, 0, 1, 0, 0, 0])).unwrap(), 0.5);
        assert!(auc(&[0.1, 0.2], &labels(&[1, 1])).is_err());
    }
}
