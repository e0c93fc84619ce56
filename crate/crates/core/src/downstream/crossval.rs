use rand::seq::SliceRandom;

use super::classifier::{train_classifier, ClassifierConfig};
use super::metrics::classification_metrics;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::seeded;

/// Sample indices of each validation fold. Stratified (per-class shuffles
/// dealt round-robin) when every class has at least `k` members, otherwise
/// a plain shuffle dealt round-robin.
pub fn kfold_partition(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid("cross-validation needs k ≥ 2"));
    }
    if k > labels.len() {
        return Err(Error::invalid(format!("k = {k} exceeds {} samples", labels.len())));
    }
    let mut rng = seeded(seed);
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    by_class.retain(|c| !c.is_empty());
    let stratified = by_class.iter().all(|c| c.len() >= k);
    let order: Vec<usize> = if stratified {
        by_class
            .into_iter()
            .flat_map(|mut c| {
                c.shuffle(&mut rng);
                c
            })
            .collect()
    } else {
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut rng);
        all
    };
    let mut folds = vec![Vec::new(); k];
    for (j, i) in order.into_iter().enumerate() {
        folds[j % k].push(i);
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    /// Index into the candidate list.
    pub best: usize,
    /// Mean validation macro-F1 per candidate.
    pub scores: Vec<f64>,
}

/// Mean validation macro-F1 of every candidate; the first maximum wins. A
/// training fold holding a single class predicts that class.
pub fn kfold_crossval(
    x: &Matrix,
    labels: &[usize],
    k: usize,
    candidates: &[ClassifierConfig],
    seed: u64,
) -> Result<CrossValidation> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate configurations".into()));
    }
    if x.rows() != labels.len() {
        return Err(Error::shape(format!("{} rows vs {} labels", x.rows(), labels.len())));
    }
    let folds = kfold_partition(labels, k, seed)?;
    let mut scores = Vec::with_capacity(candidates.len());
    for cfg in candidates {
        let mut total = 0.0;
        for fold in &folds {
            let mut held = vec![false; labels.len()];
            fold.iter().for_each(|&i| held[i] = true);
            let train: Vec<usize> = (0..labels.len()).filter(|&i| !held[i]).collect();
            let y_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let y_valid: Vec<usize> = fold.iter().map(|&i| labels[i]).collect();
            let pred = if y_train.iter().all(|&c| c == y_train[0]) {
                vec![y_train[0]; fold.len()]
            } else {
                train_classifier(&x.select_rows(&train), &y_train, cfg)?.predict_rows(&x.select_rows(fold))
            };
            total += classification_metrics(&pred, &y_valid)?.macro_f1;
        }
        scores.push(total / folds.len() as f64);
    }
    let best = (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
    Ok(CrossValidation { best, scores })
}
