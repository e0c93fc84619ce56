//! Rank-based and threshold-based evaluation of triple scorers.

mod link;
mod metrics;
mod rank;

pub use link::{evaluate_lp_rank, evaluate_lp_threshold, rank_test_triples};
pub use metrics::{
    average_precision, rank_metrics, tune_threshold, RankMetrics, ThresholdModel, HITS_AT,
};
pub use rank::{rank_entity, rank_in_scores, FnScorer, Query, RankResult, Setting, TripleScorer};
