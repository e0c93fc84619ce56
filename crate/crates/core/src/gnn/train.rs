use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::adjacency::{NormalizedAdjacency, RelationAdjacency};
use super::model::{backward, forward, GnnKind, GnnParams, GraphOperators};
use crate::downstream::classification_metrics;
use crate::error::{Error, Result};
use crate::eval::average_precision;
use crate::features::FeatureMatrix;
use crate::graph::{split_edges, EdgeSplit, KnowledgeGraph, NodeSplit, Triple};
use crate::linalg::{dot, Matrix};
use crate::optim::{Optimizer, OptimizerKind};
use crate::report::{MetricsReport, TaskKind};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeHead {
    /// `σ(z_u · z_v)`
    Dot,
    /// `σ(w · (z_u ⊙ z_v) + b)`
    Hadamard,
}

impl std::str::FromStr for EdgeHead {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(EdgeHead::Dot),
            "hadamard" => Ok(EdgeHead::Hadamard),
            _ => Err(Error::invalid(format!("unknown edge head `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnnConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub optimizer: OptimizerKind,
    /// Defaults to `min(|relations|, 4)`.
    pub num_bases: Option<usize>,
    pub sgc_k: usize,
    pub edge_head: EdgeHead,
    pub seed: u64,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig {
            hidden: 16,
            epochs: 200,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            optimizer: OptimizerKind::Adam,
            num_bases: None,
            sgc_k: 2,
            edge_head: EdgeHead::Dot,
            seed: 0,
        }
    }
}

impl GnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::invalid("hidden width must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid("gnn learning_rate must be finite and non-negative"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight_decay must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Propagation operators owned for the duration of a training run.
#[derive(Debug, Clone)]
pub enum Propagation {
    Normalized(NormalizedAdjacency),
    Relational(RelationAdjacency),
}

impl Propagation {
    pub fn for_kind(kind: GnnKind, n: usize, n_relations: usize, triples: &[Triple]) -> Result<Self> {
        Ok(match kind {
            GnnKind::Rgcn => Propagation::Relational(RelationAdjacency::from_triples(n, n_relations, triples)?),
            _ => {
                let pairs: Vec<_> = triples.iter().map(|t| (t.head, t.tail)).collect();
                Propagation::Normalized(NormalizedAdjacency::from_edges(n, &pairs)?)
            }
        })
    }

    pub fn ops(&self) -> GraphOperators<'_> {
        match self {
            Propagation::Normalized(a) => GraphOperators::normalized(a),
            Propagation::Relational(r) => GraphOperators::relational(r),
        }
    }
}

pub fn init_params(
    kind: GnnKind,
    d_in: Option<usize>,
    n_nodes: usize,
    n_relations: usize,
    d_out: usize,
    cfg: &GnnConfig,
    seed: u64,
) -> Result<GnnParams> {
    let mut rng = seeded(seed);
    let need = || d_in.ok_or_else(|| Error::invalid(format!("{kind} needs node features")));
    Ok(match kind {
        GnnKind::Gcn => GnnParams::gcn(need()?, cfg.hidden, d_out, &mut rng),
        GnnKind::Sgc => GnnParams::sgc(need()?, d_out, cfg.sgc_k, &mut rng),
        GnnKind::Rgcn => {
            let bases = cfg.num_bases.unwrap_or(n_relations.clamp(1, 4));
            GnnParams::rgcn(d_in, n_nodes, n_relations.max(1), bases, cfg.hidden, d_out, &mut rng)?
        }
    })
}

fn add_weight_decay(params: &GnnParams, wd: f64, grads: &mut [Matrix]) -> f64 {
    if wd == 0.0 {
        return 0.0;
    }
    let mut penalty = 0.0;
    for (t, g) in params.tensors.iter().zip(grads.iter_mut()) {
        penalty += t.squared_norm();
        for (gv, &tv) in g.data_mut().iter_mut().zip(t.data()) {
            *gv += wd * tv;
        }
    }
    0.5 * wd * penalty
}

/// Mean softmax cross-entropy over `targets` (node, class) plus
/// `wd/2 · Σ‖W‖²`, with its gradient for every tensor.
pub fn node_objective(
    params: &GnnParams,
    ops: GraphOperators<'_>,
    x: Option<&Matrix>,
    targets: &[(usize, usize)],
    wd: f64,
) -> Result<(f64, Vec<Matrix>)> {
    let fwd = forward(params, ops, x)?;
    let (loss, d_out) = masked_cross_entropy(&fwd.output, targets)?;
    let mut grads = backward(params, ops, &fwd, &d_out)?;
    let penalty = add_weight_decay(params, wd, &mut grads);
    Ok((loss + penalty, grads))
}

fn masked_cross_entropy(logits: &Matrix, targets: &[(usize, usize)]) -> Result<(f64, Matrix)> {
    if targets.is_empty() {
        return Err(Error::Empty("no training nodes".into()));
    }
    let m = targets.len() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for &(i, c) in targets {
        if c >= logits.cols() {
            return Err(Error::shape(format!("class {c} of {} outputs", logits.cols())));
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        loss += max + sum.ln() - row[c];
        let g = grad.row_mut(i);
        for (k, v) in row.iter().enumerate() {
            g[k] += (v - max).exp() / sum / m;
        }
        g[c] -= 1.0 / m;
    }
    Ok((loss / m, grad))
}

/// Row-wise argmax, ties to the lowest class.
pub fn predict_classes(logits: &Matrix, nodes: &[usize]) -> Vec<usize> {
    nodes
        .iter()
        .map(|&i| {
            let row = logits.row(i);
            (0..row.len()).fold(0, |best, k| if row[k] > row[best] { k } else { best })
        })
        .collect()
}

fn step(opt: &mut Optimizer, params: &mut GnnParams, grads: &[Matrix]) {
    opt.next_step();
    for (slot, (t, g)) in params.tensors.iter_mut().zip(grads).enumerate() {
        opt.update(slot, 0, t.data_mut(), g.data());
    }
}

fn optimizer_for(params: &GnnParams, cfg: &GnnConfig, extra: &[usize]) -> Optimizer {
    let mut sizes: Vec<usize> = params.tensors.iter().map(|t| t.data().len()).collect();
    sizes.extend_from_slice(extra);
    Optimizer::new(cfg.optimizer, cfg.learning_rate, &sizes)
}

fn feature_data(features: Option<&FeatureMatrix>, n: usize) -> Result<Option<&Matrix>> {
    match features {
        Some(f) if f.rows() != n => Err(Error::shape(format!(
            "{} feature rows for {n} entities",
            f.rows()
        ))),
        Some(f) => Ok(Some(&f.data)),
        None => Ok(None),
    }
}

#[derive(Debug, Clone)]
pub struct GnnNodeTraining {
    /// Parameters at the epoch with the best validation macro-F1.
    pub params: GnnParams,
    pub best_epoch: usize,
    pub best_valid_f1: f64,
    pub losses: Vec<f64>,
}

fn labeled(kg: &KnowledgeGraph, nodes: &[usize]) -> Result<Vec<(usize, usize)>> {
    nodes
        .iter()
        .map(|&e| {
            kg.label(e)
                .map(|c| (e, c))
                .ok_or_else(|| Error::invalid(format!("entity `{}` has no label", kg.entities().name(e))))
        })
        .collect()
}

/// Full-graph forward, loss masked to the training nodes. The returned
/// parameters are those that scored the best validation macro-F1 (earliest
/// on ties); without validation nodes they are the final ones.
pub fn train_gnn_node(
    kg: &KnowledgeGraph,
    features: Option<&FeatureMatrix>,
    split: &NodeSplit,
    kind: GnnKind,
    cfg: &GnnConfig,
) -> Result<GnnNodeTraining> {
    cfg.validate()?;
    let x = feature_data(features, kg.num_entities())?;
    let train = labeled(kg, &split.train)?;
    let valid = labeled(kg, &split.valid)?;
    let prop = Propagation::for_kind(kind, kg.num_entities(), kg.num_relations(), kg.triples())?;
    let n_classes = kg.num_classes().max(1);
    let mut params = init_params(
        kind,
        x.map(Matrix::cols),
        kg.num_entities(),
        kg.num_relations(),
        n_classes,
        cfg,
        cfg.seed,
    )?;
    let mut opt = optimizer_for(&params, cfg, &[]);
    let valid_nodes: Vec<usize> = valid.iter().map(|p| p.0).collect();
    let valid_truth: Vec<usize> = valid.iter().map(|p| p.1).collect();
    let score_valid = |logits: &Matrix| -> Result<f64> {
        if valid.is_empty() {
            return Ok(f64::NAN);
        }
        Ok(classification_metrics(&predict_classes(logits, &valid_nodes), &valid_truth)?.macro_f1)
    };

    let mut best: Option<(usize, f64, GnnParams)> = None;
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..=cfg.epochs {
        let fwd = forward(&params, prop.ops(), x)?;
        if !valid.is_empty() {
            let f1 = score_valid(&fwd.output)?;
            if best.as_ref().map_or(true, |b| f1 > b.1) {
                best = Some((epoch, f1, params.clone()));
            }
        }
        if epoch == cfg.epochs {
            break;
        }
        let (ce, d_out) = masked_cross_entropy(&fwd.output, &train)?;
        let mut grads = backward(&params, prop.ops(), &fwd, &d_out)?;
        let loss = ce + add_weight_decay(&params, cfg.weight_decay, &mut grads);
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                batch: 0,
                learning_rate: cfg.learning_rate,
            });
        }
        losses.push(loss);
        step(&mut opt, &mut params, &grads);
        if !params.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                batch: 0,
                learning_rate: cfg.learning_rate,
            });
        }
    }
    let (best_epoch, best_valid_f1, params) = best.unwrap_or((cfg.epochs, f64::NAN, params));
    Ok(GnnNodeTraining {
        params,
        best_epoch,
        best_valid_f1,
        losses,
    })
}

/// Test accuracy and macro-F1 of a trained node classifier.
pub fn evaluate_gnn_node(
    kg: &KnowledgeGraph,
    features: Option<&FeatureMatrix>,
    split: &NodeSplit,
    params: &GnnParams,
) -> Result<MetricsReport> {
    let x = feature_data(features, kg.num_entities())?;
    let prop = Propagation::for_kind(params.kind, kg.num_entities(), kg.num_relations(), kg.triples())?;
    let logits = forward(params, prop.ops(), x)?.output;
    let mut report = MetricsReport::new(TaskKind::NodeGnn, split.seed);
    for (name, nodes) in [("train", &split.train), ("valid", &split.valid), ("test", &split.test)] {
        if nodes.is_empty() {
            continue;
        }
        let truth: Vec<usize> = labeled(kg, nodes)?.into_iter().map(|p| p.1).collect();
        let m = classification_metrics(&predict_classes(&logits, nodes), &truth)?;
        report.insert(format!("node.gnn.{name}.accuracy"), m.accuracy);
        report.insert(format!("node.gnn.{name}.macro_f1"), m.macro_f1);
    }
    Ok(report)
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

/// Logit of an edge under the chosen head; `head` holds `[w…, b]` for the
/// Hadamard head.
fn edge_logit(z: &Matrix, head: Option<&Matrix>, u: usize, v: usize) -> f64 {
    match head {
        None => dot(z.row(u), z.row(v)),
        Some(h) => {
            let w = h.data();
            let d = w.len() - 1;
            z.row(u)
                .iter()
                .zip(z.row(v))
                .zip(&w[..d])
                .map(|((a, b), wk)| wk * a * b)
                .sum::<f64>()
                + w[d]
        }
    }
}

/// Edge probabilities from node embeddings `z`.
pub fn edge_probabilities(z: &Matrix, head: Option<&Matrix>, edges: &[(usize, usize)]) -> Vec<f64> {
    edges.iter().map(|&(u, v)| sigmoid(edge_logit(z, head, u, v))).collect()
}

/// Mean binary cross-entropy over labeled edges plus weight decay, with
/// gradients for the model tensors and (if present) the head.
pub fn link_objective(
    params: &GnnParams,
    head: Option<&Matrix>,
    ops: GraphOperators<'_>,
    x: Option<&Matrix>,
    edges: &[(usize, usize, bool)],
    wd: f64,
) -> Result<(f64, Vec<Matrix>, Option<Matrix>)> {
    if edges.is_empty() {
        return Err(Error::Empty("no training edges".into()));
    }
    let fwd = forward(params, ops, x)?;
    let z = &fwd.output;
    let d = z.cols();
    if let Some(h) = head {
        if h.data().len() != d + 1 {
            return Err(Error::shape(format!("edge head has {} weights for width {d}", h.data().len())));
        }
    }
    let m = edges.len() as f64;
    let mut d_z = Matrix::zeros(z.rows(), d);
    let mut d_head = head.map(|h| Matrix::zeros(h.rows(), h.cols()));
    let mut loss = 0.0;
    for &(u, v, y) in edges {
        let s = edge_logit(z, head, u, v);
        let y = if y { 1.0 } else { 0.0 };
        loss += softplus(s) - y * s;
        let g = (sigmoid(s) - y) / m;
        let (zu, zv) = (z.row(u).to_vec(), z.row(v).to_vec());
        match (head, d_head.as_mut()) {
            (Some(h), Some(dh)) => {
                let w = h.data();
                let dh = dh.data_mut();
                for k in 0..d {
                    dh[k] += g * zu[k] * zv[k];
                    d_z.row_mut(u)[k] += g * w[k] * zv[k];
                    d_z.row_mut(v)[k] += g * w[k] * zu[k];
                }
                dh[d] += g;
            }
            _ => {
                for k in 0..d {
                    d_z.row_mut(u)[k] += g * zv[k];
                    d_z.row_mut(v)[k] += g * zu[k];
                }
            }
        }
    }
    let mut grads = backward(params, ops, &fwd, &d_z)?;
    let mut penalty = add_weight_decay(params, wd, &mut grads);
    if let (Some(h), Some(dh)) = (head, d_head.as_mut()) {
        penalty += 0.5 * wd * h.squared_norm();
        for (g, &w) in dh.data_mut().iter_mut().zip(h.data()) {
            *g += wd * w;
        }
    }
    Ok((loss / m + penalty, grads, d_head))
}

#[derive(Debug, Clone)]
pub struct GnnLinkTraining {
    pub params: GnnParams,
    /// `[w…, b]` of the Hadamard head; `None` for the dot-product head.
    pub head: Option<Matrix>,
    pub losses: Vec<f64>,
    /// Shuffled test positives and negatives with their probabilities.
    pub test_edges: Vec<(usize, usize, bool)>,
    pub test_scores: Vec<f64>,
    pub test_ap: f64,
}

pub fn train_gnn_link(
    kg: &KnowledgeGraph,
    features: Option<&FeatureMatrix>,
    kind: GnnKind,
    cfg: &GnnConfig,
    seed: u64,
) -> Result<GnnLinkTraining> {
    cfg.validate()?;
    let x = feature_data(features, kg.num_entities())?;
    let EdgeSplit { train, test, .. } = split_edges(kg, 0.8, seed)?;
    let kept: HashSet<(usize, usize)> = train.iter().filter(|e| e.2).map(|e| (e.0, e.1)).collect();
    let visible: Vec<Triple> = kg
        .triples()
        .iter()
        .copied()
        .filter(|t| kept.contains(&(t.head, t.tail)))
        .collect();
    let prop = Propagation::for_kind(kind, kg.num_entities(), kg.num_relations(), &visible)?;
    let mut params = init_params(
        kind,
        x.map(Matrix::cols),
        kg.num_entities(),
        kg.num_relations(),
        cfg.hidden,
        cfg,
        derive_seed(seed, 1),
    )?;
    let mut head = match cfg.edge_head {
        EdgeHead::Dot => None,
        EdgeHead::Hadamard => {
            let mut h = Matrix::zeros(1, cfg.hidden + 1);
            h.data_mut()[..cfg.hidden].fill(1.0);
            Some(h)
        }
    };
    let extra: Vec<usize> = head.iter().map(|h| h.data().len()).collect();
    let mut opt = optimizer_for(&params, cfg, &extra);
    let head_slot = params.tensors.len();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, grads, d_head) = link_objective(&params, head.as_ref(), prop.ops(), x, &train, cfg.weight_decay)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                batch: 0,
                learning_rate: cfg.learning_rate,
            });
        }
        losses.push(loss);
        step(&mut opt, &mut params, &grads);
        if let (Some(h), Some(dh)) = (head.as_mut(), d_head) {
            opt.update(head_slot, 0, h.data_mut(), dh.data());
        }
        if !params.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                batch: 0,
                learning_rate: cfg.learning_rate,
            });
        }
    }
    let z = forward(&params, prop.ops(), x)?.output;
    let pairs: Vec<(usize, usize)> = test.iter().map(|e| (e.0, e.1)).collect();
    let test_scores = edge_probabilities(&z, head.as_ref(), &pairs);
    let labels: Vec<bool> = test.iter().map(|e| e.2).collect();
    let test_ap = average_precision(&test_scores, &labels)?;
    Ok(GnnLinkTraining {
        params,
        head,
        losses,
        test_edges: test,
        test_scores,
        test_ap,
    })
}
