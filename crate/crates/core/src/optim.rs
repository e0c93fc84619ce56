//! First-order optimizers shared by the embedding, GNN and classifier trainers.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    /// Adam with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(crate::Error::invalid(format!("unknown optimizer `{other}`"))),
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Optimizer state over a fixed list of parameter slots. Updates may cover a
/// sub-range of a slot (row-sparse embedding updates); untouched entries keep
/// their moments unchanged.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, slot_sizes: &[usize]) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => (
                slot_sizes.iter().map(|&n| vec![0.0; n]).collect(),
                slot_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            ),
        };
        Optimizer {
            kind,
            lr,
            step: 0,
            m,
            v,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// Advance the step counter; call once per mini-batch before `update`.
    pub fn next_step(&mut self) {
        self.step = self.step.saturating_add(1);
    }

    /// Descend along `grad` for `params`, which live at `offset` within `slot`.
    pub fn update(&mut self, slot: usize, offset: usize, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam => {
                let t = self.step.max(1);
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                let m = &mut self.m[slot][offset..offset + params.len()];
                let v = &mut self.v[slot][offset..offset + params.len()];
                for i in 0..params.len() {
                    let g = grad[i];
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    params[i] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}
