use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold and ranking metrics for one evaluation batch.
///
/// `null_precision` is the precision of the always-positive classifier,
/// i.e. the positive prevalence. The AUC metrics are `None` when only one
/// class is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub batch: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub pr_auc: Option<f64>,
    pub roc_auc: Option<f64>,
    pub null_precision: f64,
    pub n: usize,
    pub positives: usize,
}

/// Precision at `threshold` (`p >= threshold` is a positive call). Zero
/// when nothing is called positive.
pub fn precision_at(labels: &[bool], probs: &[f64], threshold: f64) -> f64 {
    let (mut tp, mut fp) = (0usize, 0usize);
    for (&y, &p) in labels.iter().zip(probs) {
        if p >= threshold {
            if y {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    }
}

/// Average precision: the step integral of the precision-recall curve over
/// distinct score thresholds, highest first.
pub fn average_precision(labels: &[bool], probs: &[f64]) -> Option<f64> {
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let score = probs[order[i]];
        while i < order.len() && probs[order[i]] == score {
            tp += usize::from(labels[order[i]]);
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Some(ap)
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// ROC-AUC via the rank-sum statistic.
pub fn roc_auc(labels: &[bool], probs: &[f64]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let ranks = average_ranks(probs);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &y)| y).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

pub fn classification_metrics(
    batch: impl Into<String>,
    labels: &[bool],
    probs: &[f64],
    threshold: f64,
) -> Result<MetricsRecord> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("no samples to score".into()));
    }
    if labels.len() != probs.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: probs.len(),
        });
    }
    let positives = labels.iter().filter(|&&y| y).count();
    let tp = labels.iter().zip(probs).filter(|(&y, &p)| y && p >= threshold).count();
    let precision = precision_at(labels, probs, threshold);
    let recall = if positives == 0 {
        0.0
    } else {
        tp as f64 / positives as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricsRecord {
        batch: batch.into(),
        precision,
        recall,
        f1,
        pr_auc: average_precision(labels, probs),
        roc_auc: roc_auc(labels, probs),
        null_precision: positives as f64 / labels.len() as f64,
        n: labels.len(),
        positives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_scores() {
        let labels = [true, true, false, false, true];
        let probs = [0.9, 0.8, 0.1, 0.2, 0.7];
        let m = classification_metrics("b", &labels, &probs, 0.5).unwrap();
        assert_eq!((m.precision, m.f1), (1.0, 1.0));
        assert_eq!(m.pr_auc, Some(1.0));
        assert_eq!(m.roc_auc, Some(1.0));
        assert_eq!(m.null_precision, 0.6);
    }

    #[test]
    fn constant_scores_are_no_skill() {
        let labels = [true, false, false, true, false];
        let probs = [0.3; 5];
        let m = classification_metrics("b", &labels, &probs, 0.5).unwrap();
        assert_eq!(m.roc_auc, Some(0.5));
        assert_eq!(m.pr_auc, Some(0.4));
        assert_eq!(m.precision, 0.0);
    }

    #[test]
    fn single_class_leaves_auc_undefined() {
        let m = classification_metrics("b", &[true, true], &[0.2, 0.9], 0.5).unwrap();
        assert_eq!(m.roc_auc, None);
        assert!(m.pr_auc.is_some());
        let m = classification_metrics("b", &[false, false], &[0.2, 0.9], 0.5).unwrap();
        assert_eq!(m.pr_auc, None);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(classification_metrics("b", &[], &[], 0.5).is_err());
    }

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
