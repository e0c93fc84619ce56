use rand_distr::{Distribution, StandardNormal};

use super::{FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::linalg::Matrix;
use crate::rng::seeded;

fn one_hot(bins: &[usize], max_bins: usize, kind: FeatureKind) -> FeatureMatrix {
    let mut m = Matrix::zeros(bins.len(), max_bins);
    for (i, &b) in bins.iter().enumerate() {
        m[(i, b.min(max_bins - 1))] = 1.0;
    }
    FeatureMatrix::new(kind, m)
}

/// One-hot of `min(in-degree, max_bins − 1)`.
pub fn in_degree_features(kg: &KnowledgeGraph, max_bins: usize) -> Result<FeatureMatrix> {
    if max_bins == 0 {
        return Err(Error::invalid("max_bins must be at least 1"));
    }
    Ok(one_hot(&kg.in_degrees(), max_bins, FeatureKind::InDegree))
}

/// Greedy proper coloring of the undirected skeleton, visiting nodes by
/// descending degree (ties by index) and giving each the smallest color
/// unused by its colored neighbors.
pub fn greedy_coloring(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| adjacency[b].len().cmp(&adjacency[a].len()).then(a.cmp(&b)));
    let mut color = vec![usize::MAX; n];
    let mut used = Vec::new();
    for v in order {
        used.clear();
        used.resize(adjacency[v].len() + 1, false);
        for &u in &adjacency[v] {
            if color[u] < used.len() {
                used[color[u]] = true;
            }
        }
        color[v] = used.iter().position(|&taken| !taken).unwrap();
    }
    color
}

/// One-hot of `min(greedy color, max_bins − 1)`.
pub fn coloring_features(kg: &KnowledgeGraph, max_bins: usize) -> Result<FeatureMatrix> {
    if max_bins == 0 {
        return Err(Error::invalid("max_bins must be at least 1"));
    }
    let colors = greedy_coloring(&kg.skeleton());
    Ok(one_hot(&colors, max_bins, FeatureKind::Coloring))
}

/// I.i.d. standard normal entries.
pub fn random_features(n: usize, dim: usize, seed: u64) -> Result<FeatureMatrix> {
    if dim == 0 {
        return Err(Error::invalid("random features need a positive dimension"));
    }
    let mut rng = seeded(seed);
    let data = (0..n * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(FeatureMatrix::new(FeatureKind::Random, Matrix::from_vec(n, dim, data)))
}
