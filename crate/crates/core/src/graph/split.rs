use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{sample_negative_edges, KnowledgeGraph, Triple};
use crate::error::{Error, Result};
use crate::rng::seeded;

/// `(u, v, is_edge)`.
pub type LabeledEdge = (usize, usize, bool);

/// Train/valid/test partition of the triples. Every entity and relation that
/// occurs in valid or test also occurs in train.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleSplit {
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    pub seed: u64,
    /// Triples placed in train to satisfy coverage before random filling.
    pub forced_train: usize,
}

impl TripleSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all(&self) -> impl Iterator<Item = &Triple> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }
}

/// Train/valid/test partition of the labeled entities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub stratified: bool,
}

/// Link prediction as binary classification: positive pairs split into
/// train and test, each side matched by as many sampled non-edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSplit {
    pub train: Vec<LabeledEdge>,
    /// Positives and negatives shuffled together.
    pub test: Vec<LabeledEdge>,
    pub seed: u64,
}

fn check_fractions(train_frac: f64, valid_frac: f64) -> Result<()> {
    if !(train_frac > 0.0 && train_frac <= 1.0) {
        return Err(Error::invalid(format!("train fraction {train_frac} not in (0, 1]")));
    }
    if !(0.0..=1.0).contains(&valid_frac) || train_frac + valid_frac > 1.0 + 1e-12 {
        return Err(Error::invalid(format!(
            "fractions {train_frac} + {valid_frac} exceed 1"
        )));
    }
    Ok(())
}

fn target_sizes(n: usize, train_frac: f64, valid_frac: f64) -> (usize, usize) {
    let n_train = ((train_frac * n as f64).round() as usize).min(n);
    let n_valid = ((valid_frac * n as f64).round() as usize).min(n - n_train);
    (n_train, n_valid)
}

/// Seeded split with entity/relation coverage repair: a greedy pass over a
/// shuffled order first claims one covering triple per entity and relation
/// for train, then the remaining triples fill the requested sizes. When the
/// covering set exceeds the train target, test keeps its size ahead of valid.
pub fn split_triples(kg: &KnowledgeGraph, train_frac: f64, valid_frac: f64, seed: u64) -> Result<TripleSplit> {
    check_fractions(train_frac, valid_frac)?;
    let n = kg.num_triples();
    if n == 0 {
        return Err(Error::Empty("cannot split a graph with no triples".into()));
    }
    let (n_train, n_valid) = target_sizes(n, train_frac, valid_frac);
    if n_train == 0 {
        return Err(Error::invalid(format!(
            "train fraction {train_frac} leaves no training triples out of {n}"
        )));
    }
    let n_test = n - n_train - n_valid;

    let mut rng = seeded(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let triples = kg.triples();
    let mut entity_seen = vec![false; kg.num_entities()];
    let mut relation_seen = vec![false; kg.num_relations()];
    let mut forced = Vec::new();
    let mut rest = Vec::new();
    for &i in &order {
        let t = triples[i];
        let new = !entity_seen[t.head] || !entity_seen[t.tail] || !relation_seen[t.relation];
        if new {
            entity_seen[t.head] = true;
            entity_seen[t.tail] = true;
            relation_seen[t.relation] = true;
            forced.push(i);
        } else {
            rest.push(i);
        }
    }

    let forced_train = forced.len();
    let fill = n_train.saturating_sub(forced_train);
    let remaining = rest.len() - fill;
    let test_len = n_test.min(remaining);
    let valid_len = remaining - test_len;

    let mut train_idx = forced;
    train_idx.extend_from_slice(&rest[..fill]);
    let mut valid_idx = rest[fill..fill + valid_len].to_vec();
    let mut test_idx = rest[fill + valid_len..].to_vec();
    for v in [&mut train_idx, &mut valid_idx, &mut test_idx] {
        v.sort_unstable();
    }
    let pick = |idx: &[usize]| idx.iter().map(|&i| triples[i]).collect::<Vec<_>>();
    Ok(TripleSplit {
        train: pick(&train_idx),
        valid: pick(&valid_idx),
        test: pick(&test_idx),
        seed,
        forced_train,
    })
}

/// Seeded split of labeled entities. Stratified by class when every class
/// has at least three members, otherwise a plain shuffle. With three or more
/// labeled entities, every split whose fraction is positive is nonempty.
pub fn split_nodes(kg: &KnowledgeGraph, train_frac: f64, valid_frac: f64, seed: u64) -> Result<NodeSplit> {
    check_fractions(train_frac, valid_frac)?;
    let labeled = kg.labeled_entities();
    let n = labeled.len();
    if n == 0 {
        return Err(Error::Empty("graph has no labeled entities".into()));
    }
    let (mut n_train, mut n_valid) = target_sizes(n, train_frac, valid_frac);
    let mut n_test = n - n_train - n_valid;
    if n >= 3 {
        let wants_test = train_frac + valid_frac < 1.0 - 1e-12;
        let wants = [true, valid_frac > 0.0, wants_test];
        let mut sizes = [n_train, n_valid, n_test];
        for k in 0..3 {
            if wants[k] && sizes[k] == 0 {
                let donor = (0..3).max_by_key(|&j| (sizes[j], usize::MAX - j)).unwrap();
                sizes[donor] -= 1;
                sizes[k] += 1;
            }
        }
        [n_train, n_valid, n_test] = sizes;
    }
    debug_assert_eq!(n_train + n_valid + n_test, n);

    let mut rng = seeded(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); kg.num_classes()];
    for &e in &labeled {
        by_class[kg.label(e).unwrap()].push(e);
    }
    let stratified = by_class.iter().all(|c| c.is_empty() || c.len() >= 3);
    let order: Vec<usize> = if stratified {
        // Interleave classes by within-class quantile so that every prefix of
        // the ordering holds each class in proportion (±1).
        let mut keyed = Vec::with_capacity(n);
        for (class, members) in by_class.iter_mut().enumerate() {
            members.shuffle(&mut rng);
            let m = members.len() as f64;
            for (j, &e) in members.iter().enumerate() {
                keyed.push(((j as f64 + 0.5) / m, class, e));
            }
        }
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        keyed.into_iter().map(|(_, _, e)| e).collect()
    } else {
        let mut all = labeled;
        all.shuffle(&mut rng);
        all
    };

    Ok(NodeSplit {
        train: order[..n_train].to_vec(),
        valid: order[n_train..n_train + n_valid].to_vec(),
        test: order[n_train + n_valid..].to_vec(),
        seed,
        stratified,
    })
}

/// Shuffle the distinct `(head, tail)` pairs, keep `round(train_frac·m)`
/// (clamped so both sides are nonempty) for training, then draw `m`
/// non-edges and hand the first batch to train and the rest to test.
pub fn split_edges(kg: &KnowledgeGraph, train_frac: f64, seed: u64) -> Result<EdgeSplit> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::invalid(format!("edge train fraction {train_frac} not in (0, 1)")));
    }
    let mut pairs = kg.directed_pairs();
    if pairs.len() < 2 {
        return Err(Error::invalid("link prediction needs at least two edges"));
    }
    let mut rng = seeded(seed);
    pairs.shuffle(&mut rng);
    let m = pairs.len();
    let n_train = ((train_frac * m as f64).round() as usize).clamp(1, m - 1);
    let negatives = sample_negative_edges(kg, m, &mut rng)?;
    let label = |edges: &[(usize, usize)], y: bool| -> Vec<LabeledEdge> {
        edges.iter().map(|&(u, v)| (u, v, y)).collect()
    };
    let mut train = label(&pairs[..n_train], true);
    train.extend(label(&negatives[..n_train], false));
    let mut test = label(&pairs[n_train..], true);
    test.extend(label(&negatives[n_train..], false));
    test.shuffle(&mut rng);
    Ok(EdgeSplit { train, test, seed })
}
