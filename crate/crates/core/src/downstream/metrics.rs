use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Accuracy and macro-F1 over the union of predicted and true labels. A
/// class with zero precision and recall contributes F1 = 0.
pub fn classification_metrics(pred: &[usize], truth: &[usize]) -> Result<ClassificationMetrics> {
    if pred.len() != truth.len() {
        return Err(Error::shape(format!(
            "{} predictions vs {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Empty("classification metrics of no samples".into()));
    }
    // class -> (true positives, predicted count, true count)
    let mut counts: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    let mut correct = 0;
    for (&p, &t) in pred.iter().zip(truth) {
        counts.entry(p).or_default().1 += 1;
        counts.entry(t).or_default().2 += 1;
        if p == t {
            correct += 1;
            counts.entry(t).or_default().0 += 1;
        }
    }
    let f1_sum: f64 = counts
        .values()
        .map(|&(tp, predicted, actual)| {
            if tp == 0 {
                return 0.0;
            }
            let precision = tp as f64 / predicted as f64;
            let recall = tp as f64 / actual as f64;
            2.0 * precision * recall / (precision + recall)
        })
        .sum();
    Ok(ClassificationMetrics {
        accuracy: correct as f64 / pred.len() as f64,
        macro_f1: f1_sum / counts.len() as f64,
    })
}
