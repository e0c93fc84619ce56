//! Shared test helpers: finite-difference gradient checks and brute-force
//! reference implementations of the evaluation metrics.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use kgrefine::downstream::{classifier_objective, ClassifierLoss, LinearClassifier};
use kgrefine::eval::TripleScorer;
use kgrefine::features::{sgns_gradient, sgns_loss};
use kgrefine::gnn::{node_objective, GnnParams, GraphOperators, NormalizedAdjacency, RelationAdjacency};
use kgrefine::graph::{KnowledgeGraph, TripleSplit};
use kgrefine::kge::{Block, EmbeddingModel, ModelKind};
use kgrefine::rng::{derive_seed, seeded, Rng};
use kgrefine::{Matrix, Triple};
use rand::seq::SliceRandom;
use rand::Rng as _;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Denominator floor of the relative error, so exactly-zero gradient
/// components compare on an absolute scale.
pub const FD_FLOOR: f64 = 1e-6;
/// Largest gap between the one-sided slopes still treated as curvature
/// rather than a kink. Smooth objectives here give gaps near 1e-5.
pub const KINK_TOLERANCE: f64 = 2e-4;

/// Outcome of checking one family of gradients at many random points.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradStats {
    pub points: usize,
    /// Points redrawn because a kink lay within one step.
    pub redrawn: usize,
    pub max_rel_error: f64,
}

impl GradStats {
    pub fn passes(&self, min_points: usize) -> bool {
        self.points >= min_points && self.max_rel_error <= FD_TOLERANCE
    }

    fn merge(&mut self, rel: f64) {
        self.points += 1;
        self.max_rel_error = self.max_rel_error.max(rel);
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// Largest relative error between `analytic` and central differences of `f`
/// at `x`, or `None` when a one-sided slope disagrees with the other side,
/// i.e. a non-differentiable point sits within one step.
pub fn fd_check(f: &dyn Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), analytic.len());
    let f0 = f(x);
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let fp = f(&probe);
        probe[i] = x[i] - FD_STEP;
        let fm = f(&probe);
        probe[i] = x[i];
        let central = (fp - fm) / (2.0 * FD_STEP);
        let (left, right) = ((f0 - fm) / FD_STEP, (fp - f0) / FD_STEP);
        if (left - right).abs() > KINK_TOLERANCE * central.abs().max(1.0) {
            return None;
        }
        worst = worst.max(relative_error(analytic[i], central));
    }
    Some(worst)
}

/// Keep drawing points until `points` of them are smooth.
fn collect(points: usize, mut one: impl FnMut(usize) -> Option<f64>) -> GradStats {
    let mut stats = GradStats::default();
    let mut attempt = 0;
    while stats.points < points {
        match one(attempt) {
            Some(rel) => stats.merge(rel),
            None => stats.redrawn += 1,
        }
        attempt += 1;
        assert!(attempt < 20 * points + 100, "too many non-smooth points");
    }
    stats
}

/// Score gradient of a KGE model with respect to every row the triple touches.
pub fn kge_gradient_suite(kind: ModelKind, points: usize, seed: u64) -> GradStats {
    collect(points, |i| {
        let mut rng = seeded(derive_seed(seed, i as u64));
        let (n, r) = (5, 3);
        let dim = rng.gen_range(1..=4);
        let rel_dim = rng.gen_range(1..=4);
        let model = EmbeddingModel::init(kind, n, r, dim, rel_dim, 0, &mut rng).unwrap();
        let t = Triple::new(rng.gen_range(0..n), rng.gen_range(0..r), rng.gen_range(0..n));
        let g = model.score_gradient(t);
        let rows: Vec<(Block, usize, Vec<f64>)> = g.rows().map(|(b, r, v)| (b, r, v.to_vec())).collect();
        let mut x = Vec::new();
        let mut analytic = Vec::new();
        for (b, row, grad) in &rows {
            x.extend_from_slice(model.block(*b).unwrap().row(*row));
            analytic.extend_from_slice(grad);
        }
        let f = |theta: &[f64]| {
            let mut m = model.clone();
            let mut off = 0;
            for (b, row, grad) in &rows {
                let dst = m.block_mut(*b).unwrap().row_mut(*row);
                dst.copy_from_slice(&theta[off..off + grad.len()]);
                off += grad.len();
            }
            m.score(t)
        };
        fd_check(&f, &x, &analytic)
    })
}

/// Random undirected-ish multigraph edges on `n` nodes.
pub fn random_triples(n: usize, r: usize, m: usize, rng: &mut Rng) -> Vec<Triple> {
    (0..m)
        .map(|_| Triple::new(rng.gen_range(0..n), rng.gen_range(0..r), rng.gen_range(0..n)))
        .collect()
}

fn flatten(tensors: &[Matrix]) -> Vec<f64> {
    tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
}

fn unflatten(like: &GnnParams, theta: &[f64]) -> GnnParams {
    let mut p = like.clone();
    let mut off = 0;
    for t in &mut p.tensors {
        let len = t.data().len();
        t.data_mut().copy_from_slice(&theta[off..off + len]);
        off += len;
    }
    p
}

/// Masked cross-entropy (plus weight decay) of a two-layer GCN.
pub fn gcn_gradient_suite(points: usize, seed: u64) -> GradStats {
    collect(points, |i| {
        let mut rng = seeded(derive_seed(seed, i as u64));
        let n = 7;
        let triples = random_triples(n, 1, 9, &mut rng);
        let pairs: Vec<_> = triples.iter().map(|t| (t.head, t.tail)).collect();
        let adj = NormalizedAdjacency::from_edges(n, &pairs).unwrap();
        let x = Matrix::uniform(n, 3, 1.0, &mut rng);
        let params = GnnParams::gcn(3, 4, 3, &mut rng);
        let targets: Vec<(usize, usize)> = (0..4).map(|v| (v, rng.gen_range(0..3))).collect();
        let ops = GraphOperators::normalized(&adj);
        let (_, grads) = node_objective(&params, ops, Some(&x), &targets, 5e-4).unwrap();
        let f = |theta: &[f64]| node_objective(&unflatten(&params, theta), ops, Some(&x), &targets, 5e-4).unwrap().0;
        fd_check(&f, &flatten(&params.tensors), &flatten(&grads))
    })
}

/// Two-layer basis-decomposed R-GCN, alternating between input features and
/// a learned input table.
pub fn rgcn_gradient_suite(points: usize, seed: u64) -> GradStats {
    collect(points, |i| {
        let mut rng = seeded(derive_seed(seed, i as u64));
        let (n, r) = (6, 3);
        let triples = random_triples(n, r, 10, &mut rng);
        let rel = RelationAdjacency::from_triples(n, r, &triples).unwrap();
        let bases = rng.gen_range(1..=r);
        let with_x = i % 2 == 0;
        let x = Matrix::uniform(n, 3, 1.0, &mut rng);
        let params = GnnParams::rgcn(with_x.then_some(3), n, r, bases, 4, 2, &mut rng).unwrap();
        let targets: Vec<(usize, usize)> = (0..4).map(|v| (v, rng.gen_range(0..2))).collect();
        let ops = GraphOperators::relational(&rel);
        let xin = with_x.then_some(&x);
        let (_, grads) = node_objective(&params, ops, xin, &targets, 5e-4).unwrap();
        let f = |theta: &[f64]| node_objective(&unflatten(&params, theta), ops, xin, &targets, 5e-4).unwrap().0;
        fd_check(&f, &flatten(&params.tensors), &flatten(&grads))
    })
}

/// Regularized objective of a linear classifier over weights and bias.
pub fn classifier_gradient_suite(loss: ClassifierLoss, points: usize, seed: u64) -> GradStats {
    collect(points, |i| {
        let mut rng = seeded(derive_seed(seed, i as u64));
        let (n, d, c) = (8, 3, rng.gen_range(2..=4));
        let x = Matrix::uniform(n, d, 2.0, &mut rng);
        let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        let mut model = LinearClassifier::zeros(loss, c, d, rng.gen_range(0.0..0.1));
        for w in model.weights.data_mut() {
            *w = rng.gen_range(-1.0..1.0);
        }
        for b in &mut model.bias {
            *b = rng.gen_range(-1.0..1.0);
        }
        let (_, gw, gb) = classifier_objective(&model, &x, &y).unwrap();
        let wlen = c * d;
        let mut theta: Vec<f64> = model.weights.data().to_vec();
        theta.extend_from_slice(&model.bias);
        let mut analytic = gw.data().to_vec();
        analytic.extend_from_slice(&gb);
        let f = |t: &[f64]| {
            let mut m = model.clone();
            m.weights.data_mut().copy_from_slice(&t[..wlen]);
            m.bias.copy_from_slice(&t[wlen..]);
            classifier_objective(&m, &x, &y).unwrap().0
        };
        fd_check(&f, &theta, &analytic)
    })
}

/// Skip-gram negative-sampling loss of one (center, context, negatives) tuple.
pub fn sgns_gradient_suite(points: usize, seed: u64) -> GradStats {
    collect(points, |i| {
        let mut rng = seeded(derive_seed(seed, i as u64));
        let d = rng.gen_range(1..=6);
        let k = rng.gen_range(1..=4);
        let theta: Vec<f64> = (0..d * (2 + k)).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let split = |t: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
            (
                t[..d].to_vec(),
                t[d..2 * d].to_vec(),
                t[2 * d..].chunks(d).map(<[f64]>::to_vec).collect(),
            )
        };
        let (c, o, negs) = split(&theta);
        let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        let g = sgns_gradient(&c, &o, &refs);
        let mut analytic = g.center.clone();
        analytic.extend_from_slice(&g.context);
        for ng in &g.negatives {
            analytic.extend_from_slice(ng);
        }
        let f = |t: &[f64]| {
            let (c, o, negs) = split(t);
            let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
            sgns_loss(&c, &o, &refs)
        };
        fd_check(&f, &theta, &analytic)
    })
}

// ---------------------------------------------------------------------------
// Brute-force metric references.

/// Rank by sorting: place the candidates in descending score order and take
/// the rounded-up middle of the truth's tie block (1-based).
pub fn brute_rank(candidates: &[(usize, f64)], truth: usize) -> usize {
    let mut sorted = candidates.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1));
    let s = candidates.iter().find(|c| c.0 == truth).unwrap().1;
    let first = sorted.iter().position(|c| c.1 == s).unwrap() + 1;
    let last = sorted.iter().rposition(|c| c.1 == s).unwrap() + 1;
    (first + last).div_ceil(2)
}

/// `(raw, filtered)` head ranks followed by tail ranks of every test triple.
pub fn brute_test_ranks<S: TripleScorer>(scorer: &S, split: &TripleSplit) -> (Vec<usize>, Vec<usize>) {
    let known: HashSet<Triple> = split.all().copied().collect();
    let n = scorer.num_entities();
    let mut raw = (Vec::new(), Vec::new());
    let mut filtered = (Vec::new(), Vec::new());
    for tail_side in [false, true] {
        for t in &split.test {
            let complete = |e: usize| {
                if tail_side {
                    Triple::new(t.head, t.relation, e)
                } else {
                    Triple::new(e, t.relation, t.tail)
                }
            };
            let truth = if tail_side { t.tail } else { t.head };
            let all: Vec<(usize, f64)> = (0..n).map(|e| (e, scorer.score(complete(e)))).collect();
            let kept: Vec<(usize, f64)> = all
                .iter()
                .copied()
                .filter(|&(e, _)| e == truth || !known.contains(&complete(e)))
                .collect();
            let (r, f) = if tail_side { (&mut raw.1, &mut filtered.1) } else { (&mut raw.0, &mut filtered.0) };
            r.push(brute_rank(&all, truth));
            f.push(brute_rank(&kept, truth));
        }
    }
    raw.0.extend(raw.1);
    filtered.0.extend(filtered.1);
    (raw.0, filtered.0)
}

pub fn brute_mrr(ranks: &[usize]) -> f64 {
    ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64
}

pub fn brute_hits(ranks: &[usize], k: usize) -> f64 {
    ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64
}

/// AP with an explicitly recounted prefix at every positive. The order is a
/// stable descending sort (ties keep input order).
pub fn brute_average_precision(scores: &[f64], labels: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Insertion sort keeps equal elements in input order.
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 && scores[order[j - 1]] < scores[order[j]] {
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let mut total = 0.0;
    for k in 0..order.len() {
        if labels[order[k]] {
            let hits = order[..=k].iter().filter(|&&i| labels[i]).count();
            total += hits as f64 / (k + 1) as f64;
        }
    }
    total / positives as f64
}

/// `(accuracy, macro-F1)` over the union of predicted and true labels.
pub fn brute_classification(pred: &[usize], truth: &[usize]) -> (f64, f64) {
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    let classes: BTreeSet<usize> = pred.iter().chain(truth).copied().collect();
    let mut f1_sum = 0.0;
    for &c in &classes {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fneg = 0.0;
        for (&p, &t) in pred.iter().zip(truth) {
            match (p == c, t == c) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fneg += 1.0,
                _ => {}
            }
        }
        if tp > 0.0 {
            let precision = tp / (tp + fp);
            let recall = tp / (tp + fneg);
            f1_sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    (correct as f64 / pred.len() as f64, f1_sum / classes.len() as f64)
}

/// Try every candidate threshold and keep the most accurate, preferring the
/// larger threshold on ties. Returns `(delta, accuracy)`.
pub fn brute_threshold(scores: &[f64], labels: &[bool]) -> (f64, f64) {
    let mut distinct = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let lo = distinct[0];
    let hi = distinct[distinct.len() - 1];
    let mut candidates = vec![lo - lo.abs().max(1.0)];
    for w in distinct.windows(2) {
        candidates.push((w[0] + w[1]) / 2.0);
    }
    candidates.push(hi + hi.abs().max(1.0));
    let mut best = (f64::NAN, -1.0);
    for &delta in &candidates {
        let acc = scores
            .iter()
            .zip(labels)
            .filter(|(&s, &l)| (s > delta) == l)
            .count() as f64
            / scores.len() as f64;
        if acc >= best.1 {
            best = (delta, acc);
        }
    }
    best
}

/// A random graph of at most `max_entities` entities with a random test
/// subset, scored by a coarse random table so that ties are frequent.
pub fn random_ranking_instance(max_entities: usize, rng: &mut Rng) -> (TripleSplit, Vec<f64>, usize, usize) {
    let n = rng.gen_range(2..=max_entities);
    let r = rng.gen_range(1..=3);
    let mut all: Vec<Triple> = (0..n)
        .flat_map(|h| (0..r).flat_map(move |rel| (0..n).map(move |t| Triple::new(h, rel, t))))
        .collect();
    all.shuffle(rng);
    let m = rng.gen_range(2..=all.len().min(20));
    let triples = &all[..m];
    let n_test = rng.gen_range(1..=m.min(5));
    let table: Vec<f64> = (0..n * r * n).map(|_| rng.gen_range(0..4) as f64).collect();
    let split = TripleSplit {
        train: triples[n_test..].to_vec(),
        valid: Vec::new(),
        test: triples[..n_test].to_vec(),
        seed: 0,
        forced_train: 0,
    };
    (split, table, n, r)
}

pub fn table_index(t: Triple, n: usize, r: usize) -> usize {
    (t.head * r + t.relation) * n + t.tail
}

/// Entities that appear in `kg` with their in-degree, for sanity checks.
pub fn in_degrees(kg: &KnowledgeGraph) -> Vec<usize> {
    let mut d = vec![0; kg.num_entities()];
    for t in kg.triples() {
        d[t.tail] += 1;
    }
    d
}

// ---------------------------------------------------------------------------
// Scoring-pattern invariants. Each returns the largest violation seen.

fn random_model(kind: ModelKind, rng: &mut Rng) -> EmbeddingModel {
    let dim = rng.gen_range(1..=6);
    EmbeddingModel::init(kind, 6, 2, dim, dim, 0, rng).unwrap()
}

/// `score(h, r, t) = score(t, r, h)` for DistMult.
pub fn distmult_symmetry(samples: usize, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    (0..samples)
        .map(|_| {
            let m = random_model(ModelKind::DistMult, &mut rng);
            let (h, r, t) = (rng.gen_range(0..6), rng.gen_range(0..2), rng.gen_range(0..6));
            (m.score(Triple::new(h, r, t)) - m.score(Triple::new(t, r, h))).abs()
        })
        .fold(0.0, f64::max)
}

/// Shifting head and tail by the same vector leaves TransE scores unchanged.
pub fn transe_translation_invariance(samples: usize, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    (0..samples)
        .map(|i| {
            let kind = if i % 2 == 0 { ModelKind::TransEL1 } else { ModelKind::TransEL2 };
            let mut m = random_model(kind, &mut rng);
            let h = rng.gen_range(0..6);
            let t = (h + rng.gen_range(1..6)) % 6;
            let r = rng.gen_range(0..2);
            let tri = Triple::new(h, r, t);
            let before = m.score(tri);
            let shift: Vec<f64> = (0..m.dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
            for e in [h, t] {
                for (v, s) in m.entity.row_mut(e).iter_mut().zip(&shift) {
                    *v += s;
                }
            }
            (m.score(tri) - before).abs()
        })
        .fold(0.0, f64::max)
}

/// With all phases zero a RotatE relation is the identity: `(h, r, h)`
/// scores exactly 0, the maximum over all tails.
pub fn rotate_identity_maximum(samples: usize, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    (0..samples)
        .map(|_| {
            let mut m = random_model(ModelKind::RotatE, &mut rng);
            let r = rng.gen_range(0..2);
            m.relation.row_mut(r).fill(0.0);
            let h = rng.gen_range(0..6);
            let own = m.score(Triple::new(h, r, h));
            let excess = (0..6)
                .map(|t| m.score(Triple::new(h, r, t)) - own)
                .fold(0.0, f64::max);
            own.abs().max(excess)
        })
        .fold(0.0, f64::max)
}

/// A symmetric RESCAL relation matrix gives a symmetric score.
pub fn rescal_symmetric_relation(samples: usize, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    (0..samples)
        .map(|_| {
            let mut m = random_model(ModelKind::Rescal, &mut rng);
            let d = m.dim;
            let r = rng.gen_range(0..2);
            let row = m.relation.row_mut(r);
            for i in 0..d {
                for j in 0..i {
                    row[i * d + j] = row[j * d + i];
                }
            }
            let (h, t) = (rng.gen_range(0..6), rng.gen_range(0..6));
            (m.score(Triple::new(h, r, t)) - m.score(Triple::new(t, r, h))).abs()
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Oracle comparisons. Each returns the number of disagreements.

/// Every head and tail rank of `rank_test_triples` and every reported
/// metric of `evaluate_lp_rank`, raw and filtered, against the sort-based
/// reference.
pub fn ranking_oracle_mismatches(instances: usize, max_entities: usize, seed: u64) -> usize {
    use kgrefine::eval::{evaluate_lp_rank, rank_test_triples, FnScorer, Setting};
    let mut rng = seeded(seed);
    let mut bad = 0;
    for _ in 0..instances {
        let (split, table, n, r) = random_ranking_instance(max_entities, &mut rng);
        let scorer = FnScorer {
            n_entities: n,
            f: |t: Triple| table[table_index(t, n, r)],
        };
        let (raw, filtered) = brute_test_ranks(&scorer, &split);
        let got_raw = rank_test_triples(&scorer, &split, Setting::Raw).pooled();
        let got_filtered = rank_test_triples(&scorer, &split, Setting::Filtered).pooled();
        bad += raw.iter().zip(&got_raw).filter(|(a, b)| a != b).count();
        bad += filtered.iter().zip(&got_filtered).filter(|(a, b)| a != b).count();
        bad += (raw.len() != got_raw.len()) as usize + (filtered.len() != got_filtered.len()) as usize;
        let report = evaluate_lp_rank(&scorer, &split).unwrap();
        for (name, ranks) in [("raw", &raw), ("filtered", &filtered)] {
            bad += (report.get(&format!("lp.rank.{name}.mrr")) != Some(brute_mrr(ranks))) as usize;
            for k in [1, 3, 10] {
                bad += (report.get(&format!("lp.rank.{name}.hits@{k}")) != Some(brute_hits(ranks, k))) as usize;
            }
        }
    }
    bad
}

fn coarse_scores(len: usize, rng: &mut Rng) -> Vec<f64> {
    let levels = rng.gen_range(1..=6);
    (0..len).map(|_| rng.gen_range(0..levels) as f64 * 0.5 - 1.0).collect()
}

pub fn average_precision_mismatches(instances: usize, seed: u64) -> usize {
    let mut rng = seeded(seed);
    (0..instances)
        .filter(|_| {
            let len = rng.gen_range(1..=25);
            let scores = coarse_scores(len, &mut rng);
            let mut labels: Vec<bool> = (0..len).map(|_| rng.gen_bool(0.4)).collect();
            labels[rng.gen_range(0..len)] = true;
            kgrefine::eval::average_precision(&scores, &labels).unwrap() != brute_average_precision(&scores, &labels)
        })
        .count()
}

pub fn classification_mismatches(instances: usize, seed: u64) -> usize {
    let mut rng = seeded(seed);
    (0..instances)
        .filter(|_| {
            let len = rng.gen_range(1..=30);
            let c = rng.gen_range(1..=5);
            let pred: Vec<usize> = (0..len).map(|_| rng.gen_range(0..c)).collect();
            let truth: Vec<usize> = (0..len).map(|_| rng.gen_range(0..c)).collect();
            let m = kgrefine::downstream::classification_metrics(&pred, &truth).unwrap();
            (m.accuracy, m.macro_f1) != brute_classification(&pred, &truth)
        })
        .count()
}

pub fn threshold_mismatches(instances: usize, seed: u64) -> usize {
    let mut rng = seeded(seed);
    (0..instances)
        .filter(|_| {
            let len = rng.gen_range(2..=25);
            let scores = coarse_scores(len, &mut rng);
            let mut labels: Vec<bool> = (0..len).map(|_| rng.gen_bool(0.5)).collect();
            labels[0] = true;
            labels[1] = false;
            let got = kgrefine::eval::tune_threshold(&scores, &labels).unwrap();
            (got.delta, got.validation_accuracy) != brute_threshold(&scores, &labels)
        })
        .count()
}
