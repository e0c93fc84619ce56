use std::collections::BTreeSet;


use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, Triple};
use crate::linalg::{CsrMatrix, Matrix};

/// `Â = D̃^{-1/2}(A + I)D̃^{-1/2}` over the undirected skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: CsrMatrix,
}

impl NormalizedAdjacency {
    pub fn from_graph(kg: &KnowledgeGraph) -> Result<Self> {
        Self::from_edges(kg.num_entities(), &kg.directed_pairs())
    }

    /// Parallel and reversed edges collapse to one undirected edge; an
    /// explicit self-loop merges with the added identity.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("graph with no nodes".into()));
        }
        let mut pairs = BTreeSet::new();
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::shape(format!("edge ({u}, {v}) in {n}-node graph")));
            }
            if u != v {
                pairs.insert((u, v));
                pairs.insert((v, u));
            }
        }
        let mut degree = vec![1.0f64; n];
        for &(u, _) in &pairs {
            degree[u] += 1.0;
        }
        let entries = pairs
            .iter()
            .copied()
            .chain((0..n).map(|i| (i, i)))
            .map(|(u, v)| (u, v, 1.0 / (degree[u] * degree[v]).sqrt()))
            .collect();
        Ok(NormalizedAdjacency {
            matrix: CsrMatrix::from_triplets(n, n, entries),
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn mul(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.n() {
            return Err(Error::shape(format!(
                "adjacency is {n}×{n}, features have {} rows",
                x.rows(),
                n = self.n()
            )));
        }
        Ok(self.matrix.mul_dense(x))
    }
}

/// `Â^K X` by repeated sparse products; `K = 0` returns `X`.
pub fn sgc_features(adj: &NormalizedAdjacency, x: &Matrix, k: usize) -> Result<Matrix> {
    let mut out = x.clone();
    for _ in 0..k {
        out = adj.mul(&out)?;
    }
    if k == 0 && x.rows() != adj.n() {
        return Err(Error::shape("feature rows differ from node count"));
    }
    Ok(out)
}

/// One mean-normalized operator per relation: row `i` of relation `r`
/// averages over `𝒩_r(i)`, the nodes joined to `i` by `r` in either
/// direction. Rows with an empty neighborhood are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationAdjacency {
    n: usize,
    operators: Vec<CsrMatrix>,
}

impl RelationAdjacency {
    pub fn from_graph(kg: &KnowledgeGraph) -> Result<Self> {
        Self::from_triples(kg.num_entities(), kg.num_relations(), kg.triples())
    }

    pub fn from_triples(n: usize, n_relations: usize, triples: &[Triple]) -> Result<Self> {
        let mut neighbors = vec![BTreeSet::new(); n_relations];
        for t in triples {
            if t.head >= n || t.tail >= n || t.relation >= n_relations {
                return Err(Error::shape(format!("triple {t:?} out of range")));
            }
            neighbors[t.relation].insert((t.head, t.tail));
            neighbors[t.relation].insert((t.tail, t.head));
        }
        let operators = neighbors
            .into_iter()
            .map(|pairs| {
                let mut count = vec![0usize; n];
                for &(i, _) in &pairs {
                    count[i] += 1;
                }
                let entries = pairs
                    .iter()
                    .map(|&(i, j)| (i, j, 1.0 / count[i] as f64))
                    .collect();
                CsrMatrix::from_triplets(n, n, entries)
            })
            .collect();
        Ok(RelationAdjacency { n, operators })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_relations(&self) -> usize {
        self.operators.len()
    }

    pub fn operator(&self, r: usize) -> &CsrMatrix {
        &self.operators[r]
    }

    pub fn operators(&self) -> &[CsrMatrix] {
        &self.operators
    }
}
