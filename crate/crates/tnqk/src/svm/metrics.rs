//! Classification metrics over integer class labels.
//!
//! Macro averages run over classes that occur in the true labels; a class
//! never seen in truth contributes nothing. Specificity additionally skips
//! classes with no negative samples. Ratios with empty denominators inside
//! an included class (precision with no positive predictions) count as 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub recall_macro: f64,
    pub specificity_macro: f64,
    /// confusion[t][p] counts samples of true class t predicted as p.
    pub confusion: Vec<Vec<usize>>,
}

/// Compute accuracy, macro F1 / recall / specificity, and the confusion
/// matrix for labels in 0..n_classes.
pub fn metrics(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<MetricsReport> {
    if y_true.is_empty() || y_true.len() != y_pred.len() {
        return Err(Error::invalid(format!(
            "need matching non-empty label vectors, got {} and {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    if let Some(&bad) = y_true.iter().chain(y_pred).find(|&&l| l >= n_classes) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }

    let total = y_true.len();
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        confusion[t][p] += 1;
    }

    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    let accuracy = correct as f64 / total as f64;

    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    let mut present = 0usize;
    let mut spec_sum = 0.0;
    let mut spec_count = 0usize;
    for c in 0..n_classes {
        let tp = confusion[c][c];
        let truths: usize = confusion[c].iter().sum();
        if truths == 0 {
            continue;
        }
        present += 1;
        let predicted: usize = (0..n_classes).map(|t| confusion[t][c]).sum();
        let recall = tp as f64 / truths as f64;
        let precision = if predicted > 0 {
            tp as f64 / predicted as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        recall_sum += recall;
        f1_sum += f1;

        let negatives = total - truths;
        if negatives > 0 {
            let fp = predicted - tp;
            let tn = negatives - fp;
            spec_sum += tn as f64 / negatives as f64;
            spec_count += 1;
        }
    }
    debug_assert!(present > 0, "label vectors are non-empty");

    Ok(MetricsReport {
        accuracy,
        f1_macro: f1_sum / present as f64,
        recall_macro: recall_sum / present as f64,
        specificity_macro: if spec_count > 0 {
            spec_sum / spec_count as f64
        } else {
            0.0
        },
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_prediction() {
        let r = metrics(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.f1_macro, 1.0);
        assert_eq!(r.recall_macro, 1.0);
        assert_eq!(r.specificity_macro, 1.0);
        assert_eq!(r.confusion, vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn balanced_binary_half_right() {
        let r = metrics(&[0, 0, 1, 1], &[0, 1, 0, 1], 2).unwrap();
        assert_eq!(r.confusion, vec![vec![1, 1], vec![1, 1]]);
        assert_abs_diff_eq!(r.accuracy, 0.5);
        assert_abs_diff_eq!(r.recall_macro, 0.5);
        assert_abs_diff_eq!(r.f1_macro, 0.5);
        assert_abs_diff_eq!(r.specificity_macro, 0.5);
    }

    #[test]
    fn three_class_hand_oracle() {
        // Confusion [[2,1,0],[1,1,0],[0,0,1]]: per-class recalls 2/3, 1/2,
        // 1; precisions equal recalls here, so F1 matches; specificities
        // 2/3, 3/4, 1.
        let r = metrics(&[0, 0, 0, 1, 1, 2], &[0, 0, 1, 1, 0, 2], 3).unwrap();
        assert_eq!(r.confusion, vec![vec![2, 1, 0], vec![1, 1, 0], vec![0, 0, 1]]);
        assert_abs_diff_eq!(r.accuracy, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.recall_macro, 13.0 / 18.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.f1_macro, 13.0 / 18.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.specificity_macro, 29.0 / 36.0, epsilon = 1e-15);
    }

    #[test]
    fn absent_class_is_excluded_from_macros() {
        // Class 2 never occurs in truth; macros average over classes 0, 1.
        let r = metrics(&[0, 0, 1], &[0, 2, 1], 3).unwrap();
        assert_abs_diff_eq!(r.accuracy, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.recall_macro, 0.75, epsilon = 1e-15);
        // Class 0: P = 1, R = 1/2, F1 = 2/3; class 1: perfect.
        assert_abs_diff_eq!(r.f1_macro, (2.0 / 3.0 + 1.0) / 2.0, epsilon = 1e-15);
        // Class 0: one negative, predicted 1 -> TN 1, spec 1. Class 1: two
        // negatives, none predicted 1 -> spec 1.
        assert_abs_diff_eq!(r.specificity_macro, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn single_class_truth_has_no_specificity() {
        let r = metrics(&[0, 0, 0], &[0, 1, 0], 2).unwrap();
        assert_abs_diff_eq!(r.accuracy, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.recall_macro, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(r.specificity_macro, 0.0);
    }

    #[test]
    fn never_predicted_class_gets_zero_f1() {
        // Class 1 occurs in truth but is never predicted: P = 0, R = 0,
        // F1 = 0. Class 0 has R = 1, P = 1/2, F1 = 2/3.
        let r = metrics(&[0, 1], &[0, 0], 2).unwrap();
        assert_abs_diff_eq!(r.f1_macro, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.recall_macro, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(metrics(&[], &[], 2).is_err());
        assert!(metrics(&[0, 1], &[0], 2).is_err());
        assert!(metrics(&[0, 2], &[0, 1], 2).is_err());
    }
}
