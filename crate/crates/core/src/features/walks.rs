use rand::distributions::WeightedIndex;
use rand::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::linalg::{axpy, dot, Matrix};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeepWalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for DeepWalkConfig {
    fn default() -> Self {
        DeepWalkConfig {
            walks_per_node: 10,
            walk_length: 40,
            dim: 64,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl DeepWalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("deepwalk dim must be at least 1"));
        }
        if self.window == 0 {
            return Err(Error::invalid("deepwalk window must be at least 1"));
        }
        if self.walk_length == 0 {
            return Err(Error::invalid("walk_length must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("deepwalk learning_rate must be positive"));
        }
        Ok(())
    }
}

/// Uniform random walks over the undirected skeleton. Walk `k` of node `v`
/// draws from its own stream `derive_seed(seed, v)`, so walks from
/// different start nodes are independent of iteration order.
pub fn random_walks(
    kg: &KnowledgeGraph,
    walks_per_node: usize,
    walk_length: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if walk_length == 0 {
        return Err(Error::invalid("walk_length must be at least 1"));
    }
    let adj = kg.skeleton();
    let mut walks = Vec::with_capacity(adj.len() * walks_per_node);
    for start in 0..adj.len() {
        let mut rng = seeded(derive_seed(seed, start as u64));
        for _ in 0..walks_per_node {
            let mut walk = Vec::with_capacity(walk_length);
            walk.push(start);
            let mut cur = start;
            while walk.len() < walk_length {
                let Some(&next) = adj[cur].choose(&mut rng) else {
                    break;
                };
                walk.push(next);
                cur = next;
            }
            walks.push(walk);
        }
    }
    Ok(walks)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Negative-sampling objective for one (center, context) pair:
/// `−log σ(u·v) − Σ log σ(−u·vₙ)`.
pub fn sgns_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    softplus(-dot(center, context))
        + negatives
            .iter()
            .map(|n| softplus(dot(center, n)))
            .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradient {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Gradient of [`sgns_loss`] with respect to every vector involved.
pub fn sgns_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGradient {
    let g = sigmoid(dot(center, context)) - 1.0;
    let mut dc = context.iter().map(|v| g * v).collect::<Vec<_>>();
    let dctx = center.iter().map(|u| g * u).collect();
    let dneg = negatives
        .iter()
        .map(|n| {
            let g = sigmoid(dot(center, n));
            axpy(g, n, &mut dc);
            center.iter().map(|u| g * u).collect()
        })
        .collect();
    SgnsGradient {
        center: dc,
        context: dctx,
        negatives: dneg,
    }
}

#[derive(Debug, Clone)]
pub struct DeepWalkEmbedding {
    pub features: FeatureMatrix,
    /// Mean per-pair objective of each epoch.
    pub losses: Vec<f64>,
}

/// Skip-gram with negative sampling over a walk corpus. Noise nodes are
/// drawn from unigram counts raised to 0.75; the learning rate decays
/// linearly to 1e-4 of its initial value across all epochs.
pub fn deepwalk_embed(
    walks: &[Vec<usize>],
    n_nodes: usize,
    cfg: &DeepWalkConfig,
) -> Result<DeepWalkEmbedding> {
    cfg.validate()?;
    let total_tokens: usize = walks.iter().map(Vec::len).sum();
    if total_tokens == 0 {
        return Err(Error::Empty("walk corpus".into()));
    }
    let mut counts = vec![0usize; n_nodes];
    for &v in walks.iter().flatten() {
        *counts
            .get_mut(v)
            .ok_or_else(|| Error::shape(format!("walk visits node {v} of {n_nodes}")))? += 1;
    }
    let noise = WeightedIndex::new(counts.iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;

    let d = cfg.dim;
    let mut rng = seeded(cfg.seed);
    let mut center = Matrix::uniform(n_nodes, d, 0.5 / d as f64, &mut rng);
    let mut context = Matrix::zeros(n_nodes, d);
    let mut rng = seeded(derive_seed(cfg.seed, 1));

    let total_steps = (cfg.epochs * total_tokens).max(1) as f64;
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..walks.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut negs = Vec::with_capacity(cfg.negatives);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss, mut pairs) = (0.0, 0usize);
        for &w in &order {
            let walk = &walks[w];
            for (i, &c) in walk.iter().enumerate() {
                let lr = cfg.learning_rate * (1.0 - step as f64 / total_steps).max(1e-4);
                step += 1;
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window).min(walk.len() - 1);
                for (j, &o) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    negs.clear();
                    negs.extend((0..cfg.negatives).map(|_| noise.sample(&mut rng)).filter(|&n| n != o));
                    let u = center.row(c).to_vec();
                    let neg_rows: Vec<&[f64]> = negs.iter().map(|&n| context.row(n)).collect();
                    loss += sgns_loss(&u, context.row(o), &neg_rows);
                    let grad = sgns_gradient(&u, context.row(o), &neg_rows);
                    pairs += 1;
                    axpy(-lr, &grad.context, context.row_mut(o));
                    for (&n, g) in negs.iter().zip(&grad.negatives) {
                        axpy(-lr, g, context.row_mut(n));
                    }
                    axpy(-lr, &grad.center, center.row_mut(c));
                }
            }
        }
        let mean = if pairs == 0 { 0.0 } else { loss / pairs as f64 };
        if !mean.is_finite() || !center.is_finite() {
            return Err(Error::NonFinite {
                epoch: losses.len(),
                batch: 0,
                learning_rate: cfg.learning_rate,
            });
        }
        losses.push(mean);
    }
    Ok(DeepWalkEmbedding {
        features: FeatureMatrix::new(FeatureKind::Deepwalk, center),
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_synthetic, Structure, SyntheticSpec};

    #[test]
    fn isolated_node_walks_stay_put() {
        let mut b = KnowledgeGraph::builder();
        b.add_entity("solo");
        let walks = random_walks(&b.build(), 3, 5, 0).unwrap();
        assert_eq!(walks, vec![vec![0]; 3]);
    }

    #[test]
    fn single_edge_alternates() {
        let mut b = KnowledgeGraph::builder();
        b.add_named_triple("a", "r", "b");
        let walks = random_walks(&b.build(), 4, 3, 1).unwrap();
        assert_eq!(walks.len(), 8);
        for w in walks {
            assert_eq!(w.len(), 3);
            assert!(w.windows(2).all(|p| p[0] != p[1]));
        }
    }

    #[test]
    fn cycle_walk_steps_are_edges() {
        let g = generate_synthetic(&SyntheticSpec::new(Structure::Cycle, 20, 1, 0)).unwrap();
        let adj = g.skeleton();
        for w in random_walks(&g, 10, 40, 3).unwrap() {
            assert!(w.windows(2).all(|p| adj[p[0]].contains(&p[1])));
        }
        assert!(random_walks(&g, 1, 0, 3).is_err());
    }

    #[test]
    fn zero_epochs_is_initialization() {
        let walks = vec![vec![0, 1, 2]];
        let cfg = DeepWalkConfig {
            epochs: 0,
            dim: 4,
            seed: 5,
            ..DeepWalkConfig::default()
        };
        let out = deepwalk_embed(&walks, 3, &cfg).unwrap();
        let init = Matrix::uniform(3, 4, 0.125, &mut seeded(5));
        assert_eq!(out.features.data, init);
        assert!(out.losses.is_empty());
    }

    #[test]
    fn empty_corpus_rejected() {
        let cfg = DeepWalkConfig::default();
        assert!(matches!(deepwalk_embed(&[], 3, &cfg), Err(Error::Empty(_))));
        assert!(matches!(deepwalk_embed(&[vec![]], 3, &cfg), Err(Error::Empty(_))));
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let u = [0.3, -0.2, 0.5];
        let v = [0.1, 0.4, -0.3];
        let n1 = [-0.2, 0.2, 0.7];
        let negs: [&[f64]; 1] = [&n1];
        let g = sgns_gradient(&u, &v, &negs);
        let h = 1e-6;
        for k in 0..3 {
            let mut up = u;
            up[k] += h;
            let mut dn = u;
            dn[k] -= h;
            let fd = (sgns_loss(&up, &v, &negs) - sgns_loss(&dn, &v, &negs)) / (2.0 * h);
            assert!((fd - g.center[k]).abs() < 1e-8);
        }
    }
}
