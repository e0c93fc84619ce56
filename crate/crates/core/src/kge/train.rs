use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{Block, EmbeddingModel, ModelKind};
use crate::error::{Error, Result};
use crate::graph::{corrupt_triple, CorruptMode, KnowledgeGraph, TripleSplit};
use crate::optim::{Optimizer, OptimizerKind};
use crate::rng::{derive_seed, seeded};

/// Hyperparameters of [`train_kge`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dim: usize,
    /// Relation space width for TransR; `None` means `dim`.
    pub rel_dim: Option<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub margin: f64,
    pub optimizer: OptimizerKind,
    pub negatives_per_positive: usize,
    /// L2 weight decay applied to DistMult and RESCAL parameters.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 64,
            rel_dim: None,
            epochs: 300,
            batch_size: 32,
            learning_rate: 0.01,
            margin: 1.0,
            optimizer: OptimizerKind::Adam,
            negatives_per_positive: 4,
            weight_decay: 1e-5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("batch_size", self.batch_size),
            ("negatives_per_positive", self.negatives_per_positive),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if self.rel_dim == Some(0) {
            return Err(Error::invalid("rel_dim must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be finite and non-negative"));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::invalid("margin must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid("weight_decay must be non-negative"));
        }
        Ok(())
    }
}

/// Mean over pairs of `max(0, margin − s⁺ + s⁻)`.
pub fn margin_loss(pos_scores: &[f64], neg_scores: &[f64], margin: f64) -> Result<f64> {
    if pos_scores.len() != neg_scores.len() {
        return Err(Error::shape(format!(
            "{} positive scores vs {} negative scores",
            pos_scores.len(),
            neg_scores.len()
        )));
    }
    if pos_scores.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = pos_scores
        .iter()
        .zip(neg_scores)
        .map(|(p, n)| (margin - p + n).max(0.0))
        .sum();
    Ok(total / pos_scores.len() as f64)
}

#[derive(Debug, Clone)]
pub struct KgeTraining {
    pub model: EmbeddingModel,
    /// Mean margin loss of each epoch.
    pub losses: Vec<f64>,
}

/// Train a scoring model on `split.train` with mini-batch gradient descent
/// on the pairwise margin loss. Negatives are tail-or-head corruptions
/// filtered against the whole graph `kg`. Translation models have their
/// entity rows renormalized to unit length after every epoch.
pub fn train_kge(kg: &KnowledgeGraph, split: &TripleSplit, cfg: &TrainConfig, kind: ModelKind) -> Result<KgeTraining> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::Empty("no training triples".into()));
    }
    let mut init_rng = seeded(cfg.seed);
    let mut model = EmbeddingModel::init(
        kind,
        kg.num_entities(),
        kg.num_relations(),
        cfg.dim,
        cfg.rel_dim.unwrap_or(cfg.dim),
        cfg.seed,
        &mut init_rng,
    )?;
    let mut rng = seeded(derive_seed(cfg.seed, 1));
    let slots = [
        model.entity.data().len(),
        model.relation.data().len(),
        model.projection.as_ref().map_or(0, |p| p.data().len()),
    ];
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, &slots);
    let decay = if kind.is_bilinear() { cfg.weight_decay } else { 0.0 };
    let negs = cfg.negatives_per_positive;
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let pairs = (chunk.len() * negs) as f64;
            let mut grads: BTreeMap<(Block, usize), Vec<f64>> = BTreeMap::new();
            let mut batch_loss = 0.0;
            for &i in chunk {
                let pos = split.train[i];
                let s_pos = model.score(pos);
                for _ in 0..negs {
                    let neg = corrupt_triple(kg, pos, CorruptMode::Either, &mut rng)?;
                    let s_neg = model.score(neg);
                    let l = cfg.margin - s_pos + s_neg;
                    if l <= 0.0 {
                        continue;
                    }
                    batch_loss += l;
                    for (triple, sign) in [(pos, -1.0), (neg, 1.0)] {
                        let g = model.score_gradient(triple);
                        for (block, row, values) in g.rows() {
                            let acc = grads
                                .entry((block, row))
                                .or_insert_with(|| vec![0.0; values.len()]);
                            crate::linalg::axpy(sign / pairs, values, acc);
                        }
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch,
                    learning_rate: cfg.learning_rate,
                });
            }
            epoch_loss += batch_loss;
            if grads.is_empty() {
                continue;
            }
            opt.next_step();
            for ((block, row), mut g) in grads {
                let params = model.block_mut(block).expect("gradient for absent block");
                let width = params.cols();
                let values = params.row_mut(row);
                if decay > 0.0 {
                    crate::linalg::axpy(decay, values, &mut g);
                }
                opt.update(block as usize, row * width, values, &g);
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        epoch,
                        batch,
                        learning_rate: cfg.learning_rate,
                    });
                }
            }
        }
        if kind.is_translational() {
            model.renormalize_entities();
        }
        losses.push(epoch_loss / (split.train.len() * negs) as f64);
    }
    Ok(KgeTraining { model, losses })
}
