use std::collections::HashSet;

use super::metrics::{average_precision, rank_metrics};
use super::rank::{rank_in_scores, Query, RankResult, Setting, TripleScorer};
use crate::error::{Error, Result};
use crate::graph::{corrupt_triple, CorruptMode, KnowledgeGraph, Triple, TripleSplit};
use crate::report::{MetricsReport, TaskKind};
use crate::rng::seeded;

/// Head and tail ranks of every test triple in one setting. Filtering uses
/// train ∪ valid ∪ test.
pub fn rank_test_triples<S: TripleScorer + ?Sized>(scorer: &S, split: &TripleSplit, setting: Setting) -> RankResult {
    let known: HashSet<Triple> = split.all().copied().collect();
    let n = scorer.num_entities();
    let mut head_ranks = Vec::with_capacity(split.test.len());
    let mut tail_ranks = Vec::with_capacity(split.test.len());
    for &t in &split.test {
        for query in [
            Query::Head {
                relation: t.relation,
                tail: t.tail,
            },
            Query::Tail {
                head: t.head,
                relation: t.relation,
            },
        ] {
            let truth = match query {
                Query::Head { .. } => t.head,
                Query::Tail { .. } => t.tail,
            };
            let scores: Vec<f64> = (0..n).map(|e| scorer.score(query.complete(e))).collect();
            let rank = match setting {
                Setting::Raw => rank_in_scores(&scores, truth, |_| false),
                Setting::Filtered => {
                    rank_in_scores(&scores, truth, |e| known.contains(&query.complete(e)))
                }
            };
            match query {
                Query::Head { .. } => head_ranks.push(rank),
                Query::Tail { .. } => tail_ranks.push(rank),
            }
        }
    }
    RankResult {
        setting,
        head_ranks,
        tail_ranks,
    }
}

/// MRR and Hits@{1,3,10} over pooled head and tail ranks of the test triples,
/// in both the filtered and the raw setting.
pub fn evaluate_lp_rank<S: TripleScorer + ?Sized>(scorer: &S, split: &TripleSplit) -> Result<MetricsReport> {
    if split.test.is_empty() {
        return Err(Error::Empty("no test triples to rank".into()));
    }
    let mut report = MetricsReport::new(TaskKind::LpRank, split.seed);
    for setting in [Setting::Filtered, Setting::Raw] {
        let name = match setting {
            Setting::Filtered => "filtered",
            Setting::Raw => "raw",
        };
        let m = rank_metrics(&rank_test_triples(scorer, split, setting).pooled())?;
        report.insert(format!("lp.rank.{name}.mrr"), m.mrr);
        for (k, v) in m.hits {
            report.insert(format!("lp.rank.{name}.hits@{k}"), v);
        }
    }
    Ok(report)
}

/// Average precision of test positives against `negatives_per_positive`
/// corruptions of each (filtered against the whole graph).
pub fn evaluate_lp_threshold<S: TripleScorer + ?Sized>(
    scorer: &S,
    kg: &KnowledgeGraph,
    split: &TripleSplit,
    negatives_per_positive: usize,
    seed: u64,
) -> Result<MetricsReport> {
    if split.test.is_empty() {
        return Err(Error::Empty("no test triples".into()));
    }
    let mut rng = seeded(seed);
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for &t in &split.test {
        scores.push(scorer.score(t));
        labels.push(true);
        for _ in 0..negatives_per_positive {
            let neg = corrupt_triple(kg, t, CorruptMode::Either, &mut rng)?;
            scores.push(scorer.score(neg));
            labels.push(false);
        }
    }
    let mut report = MetricsReport::new(TaskKind::LpThresh, seed);
    report.insert("lp.thresh.ap", average_precision(&scores, &labels)?);
    report.insert("lp.thresh.positives", split.test.len() as f64);
    report.insert("lp.thresh.negatives", (split.test.len() * negatives_per_positive) as f64);
    Ok(report)
}
