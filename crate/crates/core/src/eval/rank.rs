use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::graph::Triple;
use crate::kge::EmbeddingModel;

/// Anything that assigns a plausibility score to triples over a fixed entity set.
pub trait TripleScorer {
    fn num_entities(&self) -> usize;
    fn score(&self, t: Triple) -> f64;
}

impl TripleScorer for EmbeddingModel {
    fn num_entities(&self) -> usize {
        EmbeddingModel::num_entities(self)
    }

    fn score(&self, t: Triple) -> f64 {
        EmbeddingModel::score(self, t)
    }
}

/// Adapts a closure into a [`TripleScorer`].
pub struct FnScorer<F> {
    pub n_entities: usize,
    pub f: F,
}

impl<F: Fn(Triple) -> f64> TripleScorer for FnScorer<F> {
    fn num_entities(&self) -> usize {
        self.n_entities
    }

    fn score(&self, t: Triple) -> f64 {
        (self.f)(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    Raw,
    Filtered,
}

/// A triple with one slot left open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Query {
    /// `(h, r, ?)`
    Tail { head: usize, relation: usize },
    /// `(?, r, t)`
    Head { relation: usize, tail: usize },
}

impl Query {
    pub fn complete(self, e: usize) -> Triple {
        match self {
            Query::Tail { head, relation } => Triple::new(head, relation, e),
            Query::Head { relation, tail } => Triple::new(e, relation, tail),
        }
    }
}

/// Rank of `truth` among candidates that are not excluded:
/// `1 + #greater + ⌈#ties / 2⌉` (mean-rank tie policy, rounded half up).
pub fn rank_in_scores(scores: &[f64], truth: usize, excluded: impl Fn(usize) -> bool) -> usize {
    let s = scores[truth];
    let (mut greater, mut ties) = (0, 0);
    for (e, &v) in scores.iter().enumerate() {
        if e == truth || excluded(e) {
            continue;
        }
        if v > s {
            greater += 1;
        } else if v == s {
            ties += 1;
        }
    }
    1 + greater + (ties + 1) / 2
}

/// Rank the true completion of `query` among all entities. The filtered
/// setting ignores other candidates whose completion is in `known`.
pub fn rank_entity<S: TripleScorer + ?Sized>(
    scorer: &S,
    query: Query,
    truth: usize,
    setting: Setting,
    known: &HashSet<Triple>,
) -> usize {
    let scores: Vec<f64> = (0..scorer.num_entities())
        .map(|e| scorer.score(query.complete(e)))
        .collect();
    match setting {
        Setting::Raw => rank_in_scores(&scores, truth, |_| false),
        Setting::Filtered => rank_in_scores(&scores, truth, |e| known.contains(&query.complete(e))),
    }
}

/// Head and tail ranks of every evaluated triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub setting: Setting,
    pub head_ranks: Vec<usize>,
    pub tail_ranks: Vec<usize>,
}

impl RankResult {
    pub fn pooled(&self) -> Vec<usize> {
        self.head_ranks.iter().chain(&self.tail_ranks).copied().collect()
    }
}
