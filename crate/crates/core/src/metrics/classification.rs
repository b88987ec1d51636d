use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Positive-class F1 with its confusion counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub value: f64,
    /// Precision or recall had a zero denominator; `value` is then 0.
    pub undefined: bool,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// F1 of the positive class, predicting positive when `score >= threshold`.
pub fn f1_positive(scores: &[f64], gold: &[Label], threshold: f64) -> Result<F1Score> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("F1 over an empty prediction set".into()));
    }
    if scores.len() != gold.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} labels",
            scores.len(),
            gold.len()
        )));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(gold) {
        match (s >= threshold, y) {
            (true, Label::Positive) => tp += 1,
            (true, Label::Negative) => fp += 1,
            (false, Label::Positive) => fn_ += 1,
            (false, Label::Negative) => {}
        }
    }
    let undefined = tp + fp == 0 || tp + fn_ == 0;
    let value = if undefined {
        0.0
    } else {
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / (tp + fn_) as f64;
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    };
    Ok(F1Score {
        value,
        undefined,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Negative as N, Positive as P};

    #[test]
    fn perfect_predictions() {
        let f1 = f1_positive(&[0.9, 0.1, 0.7], &[P, N, P], 0.5).unwrap();
        assert_eq!(f1.value, 1.0);
        assert!(!f1.undefined);
    }

    #[test]
    fn all_negative_predictions_are_flagged() {
        let f1 = f1_positive(&[0.1, 0.2], &[P, N], 0.5).unwrap();
        assert_eq!(f1.value, 0.0);
        assert!(f1.undefined);
    }

    #[test]
    fn two_thirds() {
        // tp=2, fp=1, fn=1
        let f1 = f1_positive(&[0.9, 0.8, 0.7, 0.1, 0.2], &[P, P, N, P, N], 0.5).unwrap();
        assert_eq!((f1.true_positives, f1.false_positives, f1.false_negatives), (2, 1, 1));
        assert!((f1.value - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_rejected() {
        assert!(f1_positive(&[], &[], 0.5).is_err());
        assert!(f1_positive(&[0.5], &[P, N], 0.5).is_err());
    }
}
