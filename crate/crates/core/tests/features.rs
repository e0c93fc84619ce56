//! Node features: centrality encodings, DeepWalk and the TSV interchange.

mod common;

use kgrefine::features::{
    coloring_features, deepwalk_embed, greedy_coloring, in_degree_features, random_walks, DeepWalkConfig,
};
use kgrefine::graph::KnowledgeGraph;
use kgrefine::linalg::dot;
use kgrefine::rng::{derive_seed, seeded};
use kgrefine::{FeatureKind, FeatureMatrix, Matrix};
use rand::Rng as _;

fn random_adjacency(n: usize, p: f64, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = seeded(seed);
    let mut adj = vec![Vec::new(); n];
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
    }
    adj
}

#[test]
fn greedy_coloring_is_proper_on_random_graphs() {
    for i in 0..50 {
        let adj = random_adjacency(30, 0.15, derive_seed(41, i));
        let colors = greedy_coloring(&adj);
        for (u, nbrs) in adj.iter().enumerate() {
            for &v in nbrs {
                assert_ne!(colors[u], colors[v], "graph {i}: edge {u}-{v}");
            }
        }
        let max_deg = adj.iter().map(Vec::len).max().unwrap();
        assert!(colors.iter().max().unwrap() <= &max_deg);
    }
}

#[test]
fn triangle_needs_three_colors() {
    let adj = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
    let mut colors = greedy_coloring(&adj);
    colors.sort();
    assert_eq!(colors, [0, 1, 2]);
}

fn two_cliques(size: usize) -> KnowledgeGraph {
    let mut b = KnowledgeGraph::builder();
    for block in 0..2 {
        for i in 0..size {
            for j in i + 1..size {
                let (u, v) = (block * size + i, block * size + j);
                b.add_named_triple(&format!("n{u}"), "link", &format!("n{v}"));
            }
        }
    }
    b.build()
}

#[test]
fn one_hot_rows_sum_to_one() {
    let kg = two_cliques(5);
    for f in [in_degree_features(&kg, 8).unwrap(), coloring_features(&kg, 8).unwrap()] {
        for row in f.data.iter_rows() {
            assert_eq!(row.iter().sum::<f64>(), 1.0);
            assert!(row.iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }
    let colors = coloring_features(&kg, 8).unwrap();
    let used: std::collections::BTreeSet<usize> = colors
        .data
        .iter_rows()
        .map(|r| r.iter().position(|&v| v == 1.0).unwrap())
        .collect();
    assert_eq!(used.len(), 5);
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
}

#[test]
fn deepwalk_separates_disconnected_cliques() {
    let kg = two_cliques(10);
    let cfg = DeepWalkConfig {
        dim: 16,
        seed: 5,
        ..DeepWalkConfig::default()
    };
    let walks = random_walks(&kg, cfg.walks_per_node, cfg.walk_length, cfg.seed).unwrap();
    let emb = deepwalk_embed(&walks, kg.num_entities(), &cfg).unwrap();
    let x = &emb.features.data;
    let (mut intra, mut inter) = (Vec::new(), Vec::new());
    for u in 0..20 {
        for v in u + 1..20 {
            let c = cosine(x.row(u), x.row(v));
            if (u < 10) == (v < 10) {
                intra.push(c);
            } else {
                inter.push(c);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&intra) > mean(&inter), "{} vs {}", mean(&intra), mean(&inter));
    assert!(emb.losses.last().unwrap() < emb.losses.first().unwrap());
}

#[test]
fn walks_and_embeddings_are_deterministic() {
    let kg = two_cliques(6);
    let cfg = DeepWalkConfig {
        dim: 8,
        epochs: 2,
        seed: 9,
        ..DeepWalkConfig::default()
    };
    let w1 = random_walks(&kg, 3, 10, 9).unwrap();
    let w2 = random_walks(&kg, 3, 10, 9).unwrap();
    assert_eq!(w1, w2);
    let a = deepwalk_embed(&w1, 12, &cfg).unwrap();
    let b = deepwalk_embed(&w2, 12, &cfg).unwrap();
    assert_eq!(a.features, b.features);
}

#[test]
fn tsv_round_trip_of_random_matrix() {
    let mut rng = seeded(43);
    let data = Matrix::from_vec(50, 16, (0..800).map(|_| rng.gen_range(-1e3..1e3) * rng.gen::<f64>()).collect());
    let f = FeatureMatrix::new(FeatureKind::Deepwalk, data);
    let names: Vec<String> = (0..50).map(|i| format!("entity_{i}")).collect();
    let mut buf = Vec::new();
    f.write_tsv(&names, &mut buf).unwrap();
    let (back_names, back) = FeatureMatrix::read_tsv(buf.as_slice()).unwrap();
    assert_eq!(back_names, names);
    assert_eq!(back.kind, FeatureKind::Deepwalk);
    assert!(back.data.max_abs_diff(&f.data) <= 1e-12);
    assert_eq!(back, f);
}
