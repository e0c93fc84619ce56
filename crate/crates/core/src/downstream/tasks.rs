use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::classifier::{train_classifier, ClassifierConfig, ClassifierLoss};
use super::crossval::kfold_crossval;
use super::metrics::classification_metrics;
use crate::error::{Error, Result};
use crate::eval::{average_precision, tune_threshold, TripleScorer};
use crate::features::FeatureMatrix;
use crate::graph::{corrupt_triple, split_edges, CorruptMode, KnowledgeGraph, NodeSplit, Triple, TripleSplit, MAX_NEGATIVE_ATTEMPTS};
use crate::linalg::Matrix;
use crate::report::{MetricsReport, TaskKind};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeTaskConfig {
    pub classifier: ClassifierConfig,
    /// Folds for selecting `l2` from `l2_grid`; 0 disables cross-validation.
    pub cv_folds: usize,
    pub l2_grid: Vec<f64>,
}

impl Default for NodeTaskConfig {
    fn default() -> Self {
        NodeTaskConfig {
            classifier: ClassifierConfig::default(),
            cv_folds: 0,
            l2_grid: vec![1e-4, 1e-3, 1e-2, 1e-1],
        }
    }
}

fn labels_of(kg: &KnowledgeGraph, nodes: &[usize]) -> Result<Vec<usize>> {
    nodes
        .iter()
        .map(|&e| {
            kg.label(e)
                .ok_or_else(|| Error::invalid(format!("entity `{}` has no label", kg.entities().name(e))))
        })
        .collect()
}

/// Linear classifier on the feature rows of the training nodes, scored on
/// the test nodes.
pub fn run_node_classification(
    kg: &KnowledgeGraph,
    features: &FeatureMatrix,
    split: &NodeSplit,
    cfg: &NodeTaskConfig,
) -> Result<MetricsReport> {
    if features.rows() != kg.num_entities() {
        return Err(Error::shape(format!(
            "{} feature rows for {} entities",
            features.rows(),
            kg.num_entities()
        )));
    }
    let x_train = features.data.select_rows(&split.train);
    let y_train = labels_of(kg, &split.train)?;
    let mut report = MetricsReport::new(TaskKind::NodeCls, split.seed);
    let mut chosen = cfg.classifier.clone();
    if cfg.cv_folds > 0 && !cfg.l2_grid.is_empty() {
        let candidates: Vec<ClassifierConfig> = cfg
            .l2_grid
            .iter()
            .map(|&l2| ClassifierConfig {
                l2,
                ..cfg.classifier.clone()
            })
            .collect();
        let cv = kfold_crossval(&x_train, &y_train, cfg.cv_folds, &candidates, split.seed)?;
        chosen = candidates[cv.best].clone();
        report.insert("node.cls.cv.l2", chosen.l2);
        report.insert("node.cls.cv.macro_f1", cv.scores[cv.best]);
    }
    let model = train_classifier(&x_train, &y_train, &chosen)?;
    for (name, nodes) in [("train", &split.train), ("test", &split.test)] {
        if nodes.is_empty() {
            continue;
        }
        let pred = model.predict_rows(&features.data.select_rows(nodes));
        let m = classification_metrics(&pred, &labels_of(kg, nodes)?)?;
        report.insert(format!("node.cls.{name}.accuracy"), m.accuracy);
        report.insert(format!("node.cls.{name}.macro_f1"), m.macro_f1);
    }
    Ok(report)
}

/// Row per edge: elementwise product of the endpoint rows.
pub fn hadamard_edge_features(features: &Matrix, edges: &[(usize, usize)]) -> Result<Matrix> {
    let d = features.cols();
    let mut out = Matrix::zeros(edges.len(), d);
    for (k, &(u, v)) in edges.iter().enumerate() {
        if u >= features.rows() || v >= features.rows() {
            return Err(Error::shape(format!("edge ({u}, {v}) outside {} feature rows", features.rows())));
        }
        for ((o, a), b) in out.row_mut(k).iter_mut().zip(features.row(u)).zip(features.row(v)) {
            *o = a * b;
        }
    }
    Ok(out)
}

/// Logistic regression on Hadamard edge features over the 80/20 edge split.
pub fn run_link_prediction_binary(
    kg: &KnowledgeGraph,
    features: &FeatureMatrix,
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<MetricsReport> {
    if features.rows() != kg.num_entities() {
        return Err(Error::shape(format!(
            "{} feature rows for {} entities",
            features.rows(),
            kg.num_entities()
        )));
    }
    let split = split_edges(kg, 0.8, seed)?;
    let pairs = |edges: &[(usize, usize, bool)]| edges.iter().map(|e| (e.0, e.1)).collect::<Vec<_>>();
    let classes = |edges: &[(usize, usize, bool)]| edges.iter().map(|e| e.2 as usize).collect::<Vec<_>>();
    let x_train = hadamard_edge_features(&features.data, &pairs(&split.train))?;
    let cfg = ClassifierConfig {
        loss: ClassifierLoss::Logistic,
        ..cfg.clone()
    };
    let model = train_classifier(&x_train, &classes(&split.train), &cfg)?;
    let x_test = hadamard_edge_features(&features.data, &pairs(&split.test))?;
    let scores: Vec<f64> = x_test.iter_rows().map(|r| model.probability(r, 1)).collect();
    let truth = classes(&split.test);
    let labels: Vec<bool> = truth.iter().map(|&c| c == 1).collect();
    let m = classification_metrics(&model.predict_rows(&x_test), &truth)?;
    let mut report = MetricsReport::new(TaskKind::LpBinary, seed);
    report.insert("lp.binary.ap", average_precision(&scores, &labels)?);
    report.insert("lp.binary.accuracy", m.accuracy);
    Ok(report)
}

fn draw_negatives(
    kg: &KnowledgeGraph,
    positives: &[Triple],
    ratio: usize,
    avoid: &HashSet<Triple>,
    rng: &mut crate::rng::Rng,
) -> Result<Vec<Triple>> {
    let mut out = Vec::with_capacity(positives.len() * ratio);
    for &t in positives {
        for _ in 0..ratio {
            let mut attempts = 0;
            loop {
                let c = corrupt_triple(kg, t, CorruptMode::Either, rng)?;
                if !avoid.contains(&c) {
                    out.push(c);
                    break;
                }
                attempts += 1;
                if attempts >= MAX_NEGATIVE_ATTEMPTS {
                    return Err(Error::Saturated { attempts });
                }
            }
        }
    }
    Ok(out)
}

/// Score triples, tune a global threshold on valid positives and their
/// corruptions, then classify the test set. Valid and test negatives are
/// disjoint.
pub fn run_triple_classification<S: TripleScorer + ?Sized>(
    scorer: &S,
    kg: &KnowledgeGraph,
    split: &TripleSplit,
    neg_ratio: usize,
    seed: u64,
) -> Result<MetricsReport> {
    if !(1..=2).contains(&neg_ratio) {
        return Err(Error::invalid(format!("negative ratio must be 1 or 2, got {neg_ratio}")));
    }
    if split.valid.is_empty() || split.test.is_empty() {
        return Err(Error::Empty("triple classification needs valid and test triples".into()));
    }
    let mut rng = seeded(seed);
    let valid_neg = draw_negatives(kg, &split.valid, neg_ratio, &HashSet::new(), &mut rng)?;
    let avoid: HashSet<Triple> = valid_neg.iter().copied().collect();
    let test_neg = draw_negatives(kg, &split.test, neg_ratio, &avoid, &mut rng)?;

    let scored = |pos: &[Triple], neg: &[Triple]| {
        let scores: Vec<f64> = pos.iter().chain(neg).map(|&t| scorer.score(t)).collect();
        let labels: Vec<bool> = (0..pos.len() + neg.len()).map(|i| i < pos.len()).collect();
        (scores, labels)
    };
    let (vs, vl) = scored(&split.valid, &valid_neg);
    let threshold = tune_threshold(&vs, &vl)?;
    let (ts, tl) = scored(&split.test, &test_neg);
    let pred: Vec<usize> = ts.iter().map(|&s| threshold.classify(s) as usize).collect();
    let truth: Vec<usize> = tl.iter().map(|&l| l as usize).collect();
    let m = classification_metrics(&pred, &truth)?;
    let mut report = MetricsReport::new(TaskKind::TripleCls, seed);
    report.insert("triple.delta", threshold.delta);
    report.insert("triple.neg_ratio", neg_ratio as f64);
    report.insert("triple.valid.accuracy", threshold.validation_accuracy);
    report.insert("triple.test.accuracy", m.accuracy);
    report.insert("triple.test.macro_f1", m.macro_f1);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::FnScorer;
    use crate::graph::{generate_synthetic, split_triples, Structure, SyntheticSpec};

    #[test]
    fn hadamard_examples() {
        let f = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let h = hadamard_edge_features(&f, &[(0, 1), (1, 0), (1, 1)]).unwrap();
        assert_eq!(h.row(0), [3.0, 8.0]);
        assert_eq!(h.row(0), h.row(1));
        assert_eq!(h.row(2), [9.0, 16.0]);
        assert!(hadamard_edge_features(&f, &[(0, 2)]).is_err());
    }

    #[test]
    fn perfect_scorer_classifies_triples() {
        let g = generate_synthetic(&SyntheticSpec::new(Structure::Cycle, 20, 1, 0)).unwrap();
        let split = split_triples(&g, 0.8, 0.1, 2).unwrap();
        let truth = g.clone();
        let scorer = FnScorer {
            n_entities: g.num_entities(),
            f: move |t: Triple| if truth.contains(&t) { 1.0 } else { 0.0 },
        };
        for ratio in [1, 2] {
            let r = run_triple_classification(&scorer, &g, &split, ratio, 5).unwrap();
            assert_eq!(r.get("triple.test.accuracy"), Some(1.0));
        }
        assert!(run_triple_classification(&scorer, &g, &split, 3, 5).is_err());
    }
}
