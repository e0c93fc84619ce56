use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cutoffs reported for Hits@K.
pub const HITS_AT: [usize; 3] = [1, 3, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    pub mrr: f64,
    pub hits: BTreeMap<usize, f64>,
}

pub fn rank_metrics(ranks: &[usize]) -> Result<RankMetrics> {
    if ranks.is_empty() {
        return Err(Error::Empty("no ranks to summarize".into()));
    }
    if ranks.contains(&0) {
        return Err(Error::invalid("ranks start at 1"));
    }
    let n = ranks.len() as f64;
    let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n;
    let hits = HITS_AT
        .iter()
        .map(|&k| (k, ranks.iter().filter(|&&r| r <= k).count() as f64 / n))
        .collect();
    Ok(RankMetrics { mrr, hits })
}

/// Step-function average precision: scores sorted descending with ties kept
/// in original order, then the mean of precision@k over the positive positions.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::invalid("average precision needs at least one positive"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

/// Global decision threshold: a score `s` is classified positive iff `s > delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub delta: f64,
    pub validation_accuracy: f64,
}

impl ThresholdModel {
    pub fn classify(&self, score: f64) -> bool {
        score > self.delta
    }

    pub fn accuracy(&self, scores: &[f64], labels: &[bool]) -> f64 {
        let correct = scores
            .iter()
            .zip(labels)
            .filter(|(&s, &l)| self.classify(s) == l)
            .count();
        correct as f64 / scores.len() as f64
    }
}

/// Candidate thresholds in ascending order: a finite sentinel below the
/// smallest score, every midpoint between consecutive distinct scores, and a
/// sentinel above the largest score.
pub fn threshold_candidates(sorted_distinct: &[f64]) -> Vec<f64> {
    let lo = sorted_distinct[0];
    let hi = sorted_distinct[sorted_distinct.len() - 1];
    let mut out = Vec::with_capacity(sorted_distinct.len() + 1);
    out.push(lo - lo.abs().max(1.0));
    out.extend(sorted_distinct.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    out.push(hi + hi.abs().max(1.0));
    out
}

/// Pick the candidate threshold with the best validation accuracy; ties go to
/// the largest threshold. Both classes must be present.
pub fn tune_threshold(val_scores: &[f64], val_labels: &[bool]) -> Result<ThresholdModel> {
    if val_scores.len() != val_labels.len() {
        return Err(Error::shape(format!(
            "{} scores vs {} labels",
            val_scores.len(),
            val_labels.len()
        )));
    }
    if val_scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("threshold tuning needs finite scores"));
    }
    let positives = val_labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == val_labels.len() {
        return Err(Error::invalid("threshold tuning needs both classes in validation"));
    }
    let mut pairs: Vec<(f64, bool)> = val_scores.iter().copied().zip(val_labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut distinct: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    distinct.dedup();
    let candidates = threshold_candidates(&distinct);

    // Sweep upward: candidate j sits just above distinct[j-1], so every score
    // up to distinct[j-1] has flipped to negative.
    let mut correct = positives as i64;
    let mut best = (correct, 0usize);
    let mut cursor = 0;
    for (j, &value) in distinct.iter().enumerate() {
        while cursor < pairs.len() && pairs[cursor].0 == value {
            correct += if pairs[cursor].1 { -1 } else { 1 };
            cursor += 1;
        }
        if correct >= best.0 {
            best = (correct, j + 1);
        }
    }
    Ok(ThresholdModel {
        delta: candidates[best.1],
        validation_accuracy: best.0 as f64 / val_scores.len() as f64,
    })
}
