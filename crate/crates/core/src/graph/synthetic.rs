use rand::Rng as _;

use super::{KnowledgeGraph, Triple};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

/// Planted structure of a synthetic graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    /// `(i, r0, (i+1) mod n)`.
    Cycle,
    /// Row-major lattice of width `ceil(sqrt(n))`; rightward edges use
    /// relation 0, downward edges relation 1 (mod the relation count).
    Grid,
    /// Two communities (first half / second half) with edge probability 0.5
    /// inside a block and 0.02 across. Entities are labeled by block.
    TwoBlock,
}

impl std::str::FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cycle" => Ok(Structure::Cycle),
            "grid" => Ok(Structure::Grid),
            "two-block" => Ok(Structure::TwoBlock),
            other => Err(Error::invalid(format!("unknown structure `{other}`"))),
        }
    }
}

pub const INTRA_BLOCK_P: f64 = 0.5;
pub const INTER_BLOCK_P: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticSpec {
    pub structure: Structure,
    pub n_entities: usize,
    pub n_relations: usize,
    /// Extra uniformly random triples, as a fraction of the planted count.
    pub noise_frac: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(structure: Structure, n_entities: usize, n_relations: usize, seed: u64) -> Self {
        SyntheticSpec {
            structure,
            n_entities,
            n_relations,
            noise_frac: 0.0,
            seed,
        }
    }
}

/// Build a seeded synthetic graph. Entities are named `e{i}`, relations
/// `r{k}`; all `n_relations` relations are interned even if unused.
///
/// Two-block details: an intra-block pair gets a uniformly random
/// direction and relation `block mod R`; a cross-block edge always points
/// from block 0 into block 1 and uses relation `2 mod R`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<KnowledgeGraph> {
    let n = spec.n_entities;
    if n < 2 {
        return Err(Error::invalid("synthetic graphs need at least two entities"));
    }
    if spec.n_relations == 0 {
        return Err(Error::invalid("synthetic graphs need at least one relation"));
    }
    if !(spec.noise_frac >= 0.0 && spec.noise_frac.is_finite()) {
        return Err(Error::invalid("noise fraction must be finite and non-negative"));
    }
    let r = spec.n_relations;
    let mut b = KnowledgeGraph::builder();
    for i in 0..n {
        b.add_entity(&format!("e{i}"));
    }
    for k in 0..r {
        b.add_relation(&format!("r{k}"));
    }
    let mut rng = seeded(spec.seed);

    match spec.structure {
        Structure::Cycle => {
            for i in 0..n {
                b.add_triple(Triple::new(i, 0, (i + 1) % n))?;
            }
        }
        Structure::Grid => {
            let width = (n as f64).sqrt().ceil() as usize;
            for i in 0..n {
                if (i + 1) % width != 0 && i + 1 < n {
                    b.add_triple(Triple::new(i, 0, i + 1))?;
                }
                if i + width < n {
                    b.add_triple(Triple::new(i, 1 % r, i + width))?;
                }
            }
        }
        Structure::TwoBlock => {
            let half = n / 2;
            let block = |i: usize| usize::from(i >= half);
            for i in 0..n {
                for j in i + 1..n {
                    let same = block(i) == block(j);
                    let p = if same { INTRA_BLOCK_P } else { INTER_BLOCK_P };
                    if !rng.gen_bool(p) {
                        continue;
                    }
                    let t = if same {
                        let rel = block(i) % r;
                        if rng.gen_bool(0.5) {
                            Triple::new(i, rel, j)
                        } else {
                            Triple::new(j, rel, i)
                        }
                    } else {
                        Triple::new(i, 2 % r, j)
                    };
                    b.add_triple(t)?;
                }
            }
            for i in 0..n {
                b.set_label(i, &format!("block{}", block(i)))?;
            }
        }
    }

    let planted = b.num_triples();
    let extra = (spec.noise_frac * planted as f64).round() as usize;
    let mut noise_rng = seeded(derive_seed(spec.seed, 1));
    let mut added = 0;
    let mut attempts = 0;
    while added < extra && attempts < extra * 100 + 1000 {
        attempts += 1;
        let t = Triple::new(
            noise_rng.gen_range(0..n),
            noise_rng.gen_range(0..r),
            noise_rng.gen_range(0..n),
        );
        if t.head != t.tail && !b.contains(&t) {
            b.add_triple(t)?;
            added += 1;
        }
    }
    Ok(b.build())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_of_four() {
        let g = generate_synthetic(&SyntheticSpec::new(Structure::Cycle, 4, 1, 0)).unwrap();
        assert_eq!(
            g.triples(),
            [
                Triple::new(0, 0, 1),
                Triple::new(1, 0, 2),
                Triple::new(2, 0, 3),
                Triple::new(3, 0, 0)
            ]
        );
    }

    #[test]
    fn grid_edges() {
        let g = generate_synthetic(&SyntheticSpec::new(Structure::Grid, 9, 2, 0)).unwrap();
        // 3×3 lattice: 6 horizontal + 6 vertical edges.
        assert_eq!(g.num_triples(), 12);
        assert!(g.contains(&Triple::new(0, 0, 1)));
        assert!(g.contains(&Triple::new(0, 1, 3)));
        assert!(!g.contains(&Triple::new(2, 0, 3)));
    }

    #[test]
    fn two_block_labels_are_balanced() {
        let g = generate_synthetic(&SyntheticSpec::new(Structure::TwoBlock, 100, 3, 9)).unwrap();
        let ones = g.labels().values().filter(|&&c| g.classes().name(c) == "block1").count();
        assert_eq!(ones, 50);
        assert_eq!(g.labels().len(), 100);
    }

    #[test]
    fn two_block_edge_count_within_binomial_bounds() {
        // Oracle: planted edges are independent Bernoulli draws, so the count
        // has mean Σp and variance Σp(1-p) over the candidate pairs.
        let intra_pairs = 2.0 * (50.0 * 49.0 / 2.0);
        let inter_pairs = 50.0 * 50.0;
        let mean = intra_pairs * INTRA_BLOCK_P + inter_pairs * INTER_BLOCK_P;
        let var = intra_pairs * INTRA_BLOCK_P * (1.0 - INTRA_BLOCK_P)
            + inter_pairs * INTER_BLOCK_P * (1.0 - INTER_BLOCK_P);
        assert_eq!(mean, 1275.0);
        for seed in 0..5 {
            let g = generate_synthetic(&SyntheticSpec::new(Structure::TwoBlock, 100, 3, seed)).unwrap();
            let dev = (g.num_triples() as f64 - mean).abs();
            assert!(dev <= 3.0 * var.sqrt(), "seed {seed}: {} edges", g.num_triples());
        }
    }

    #[test]
    fn noise_and_determinism() {
        let mut spec = SyntheticSpec::new(Structure::Cycle, 20, 2, 5);
        spec.noise_frac = 0.5;
        let g = generate_synthetic(&spec).unwrap();
        assert_eq!(g.num_triples(), 30);
        assert_eq!(g, generate_synthetic(&spec).unwrap());
        assert!(generate_synthetic(&SyntheticSpec::new(Structure::Cycle, 1, 1, 0)).is_err());
    }
}
