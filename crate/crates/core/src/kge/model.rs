use std::f64::consts::TAU;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Triple;
use crate::linalg::{dot, l2_norm, Matrix};
use crate::rng::Rng;

/// Scoring function family. Every kind follows "higher score = more plausible".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// `−‖h + r − t‖₁`
    #[serde(rename = "transe-l1")]
    TransEL1,
    /// `−‖h + r − t‖₂`
    #[serde(rename = "transe-l2")]
    TransEL2,
    /// `−‖h·M_r + r − t·M_r‖₂` with entities in ℝ^d, relations in ℝ^k.
    #[serde(rename = "transr")]
    TransR,
    /// `Σᵢ hᵢ rᵢ tᵢ`
    #[serde(rename = "distmult")]
    DistMult,
    /// `hᵀ M_r t`
    #[serde(rename = "rescal")]
    Rescal,
    /// `−‖h ∘ r − t‖₂` over ℂ^d with unit-modulus `r = e^{iθ}`.
    #[serde(rename = "rotate")]
    RotatE,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::TransEL1,
        ModelKind::TransEL2,
        ModelKind::TransR,
        ModelKind::DistMult,
        ModelKind::Rescal,
        ModelKind::RotatE,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TransEL1 => "transe-l1",
            ModelKind::TransEL2 => "transe-l2",
            ModelKind::TransR => "transr",
            ModelKind::DistMult => "distmult",
            ModelKind::Rescal => "rescal",
            ModelKind::RotatE => "rotate",
        }
    }

    /// Translation models keep entity rows on the unit sphere.
    pub fn is_translational(self) -> bool {
        matches!(self, ModelKind::TransEL1 | ModelKind::TransEL2 | ModelKind::TransR)
    }

    /// Bilinear models are regularized with L2 weight decay instead.
    pub fn is_bilinear(self) -> bool {
        matches!(self, ModelKind::DistMult | ModelKind::Rescal)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model kind `{s}`")))
    }
}

/// Learned entity and relation parameters for one scoring model.
///
/// Row layouts:
/// - entity: `d` reals, or for RotatE `d` real parts followed by `d` imaginary parts;
/// - relation: TransE/DistMult `d` reals, RotatE `d` phases, TransR `k` reals,
///   RESCAL a row-major `d×d` matrix;
/// - projection (TransR only): a row-major `d×k` matrix per relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub kind: ModelKind,
    pub dim: usize,
    pub rel_dim: usize,
    pub seed: u64,
    pub entity: Matrix,
    pub relation: Matrix,
    pub projection: Option<Matrix>,
}

/// Parameter blocks of an [`EmbeddingModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    Entity = 0,
    Relation = 1,
    Projection = 2,
}

/// Gradient of a single triple's score. Only the listed rows are nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGradient {
    /// Entity rows; a triple with `head == tail` yields one merged row.
    pub entity: Vec<(usize, Vec<f64>)>,
    pub relation: (usize, Vec<f64>),
    pub projection: Option<(usize, Vec<f64>)>,
}

impl ScoreGradient {
    /// Iterate `(block, row, gradient)` triples.
    pub fn rows(&self) -> impl Iterator<Item = (Block, usize, &[f64])> {
        self.entity
            .iter()
            .map(|(r, g)| (Block::Entity, *r, g.as_slice()))
            .chain(std::iter::once((Block::Relation, self.relation.0, self.relation.1.as_slice())))
            .chain(
                self.projection
                    .iter()
                    .map(|(r, g)| (Block::Projection, *r, g.as_slice())),
            )
    }
}

impl EmbeddingModel {
    /// Initialize parameters uniformly in `[−6/√d, 6/√d]`; RotatE phases are
    /// uniform in `[0, 2π)`.
    pub fn init(
        kind: ModelKind,
        n_entities: usize,
        n_relations: usize,
        dim: usize,
        rel_dim: usize,
        seed: u64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if dim == 0 || rel_dim == 0 {
            return Err(Error::invalid("embedding dimensions must be positive"));
        }
        let rel_dim = if kind == ModelKind::TransR { rel_dim } else { dim };
        let bound = 6.0 / (dim as f64).sqrt();
        let entity_width = if kind == ModelKind::RotatE { 2 * dim } else { dim };
        let entity = Matrix::uniform(n_entities, entity_width, bound, rng);
        let relation = match kind {
            ModelKind::RotatE => {
                let data = (0..n_relations * dim).map(|_| rng.gen_range(0.0..TAU)).collect();
                Matrix::from_vec(n_relations, dim, data)
            }
            ModelKind::Rescal => Matrix::uniform(n_relations, dim * dim, bound, rng),
            ModelKind::TransR => Matrix::uniform(n_relations, rel_dim, bound, rng),
            _ => Matrix::uniform(n_relations, dim, bound, rng),
        };
        let projection = (kind == ModelKind::TransR)
            .then(|| Matrix::uniform(n_relations, dim * rel_dim, bound, rng));
        Ok(EmbeddingModel {
            kind,
            dim,
            rel_dim,
            seed,
            entity,
            relation,
            projection,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.entity.rows()
    }

    pub fn num_relations(&self) -> usize {
        self.relation.rows()
    }

    pub fn block(&self, b: Block) -> Option<&Matrix> {
        match b {
            Block::Entity => Some(&self.entity),
            Block::Relation => Some(&self.relation),
            Block::Projection => self.projection.as_ref(),
        }
    }

    pub fn block_mut(&mut self, b: Block) -> Option<&mut Matrix> {
        match b {
            Block::Entity => Some(&mut self.entity),
            Block::Relation => Some(&mut self.relation),
            Block::Projection => self.projection.as_mut(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entity.is_finite()
            && self.relation.is_finite()
            && self.projection.as_ref().map_or(true, Matrix::is_finite)
    }

    /// Check that a triple indexes into this model's tables.
    pub fn check(&self, t: Triple) -> Result<()> {
        if t.head >= self.num_entities() || t.tail >= self.num_entities() {
            return Err(Error::shape(format!(
                "entity index out of range in {t:?} ({} entities)",
                self.num_entities()
            )));
        }
        if t.relation >= self.num_relations() {
            return Err(Error::shape(format!(
                "relation index out of range in {t:?} ({} relations)",
                self.num_relations()
            )));
        }
        Ok(())
    }

    /// Plausibility of a triple. Panics when an index is out of range; use
    /// [`EmbeddingModel::check`] first for untrusted input.
    pub fn score(&self, t: Triple) -> f64 {
        let h = self.entity.row(t.head);
        let tl = self.entity.row(t.tail);
        let r = self.relation.row(t.relation);
        match self.kind {
            ModelKind::TransEL1 => -h
                .iter()
                .zip(r)
                .zip(tl)
                .map(|((a, b), c)| (a + b - c).abs())
                .sum::<f64>(),
            ModelKind::TransEL2 => -h
                .iter()
                .zip(r)
                .zip(tl)
                .map(|((a, b), c)| (a + b - c).powi(2))
                .sum::<f64>()
                .sqrt(),
            ModelKind::TransR => {
                let residual = self.transr_residual(t);
                -l2_norm(&residual)
            }
            ModelKind::DistMult => h.iter().zip(r).zip(tl).map(|((a, b), c)| a * b * c).sum(),
            ModelKind::Rescal => {
                let d = self.dim;
                (0..d).map(|i| h[i] * dot(&r[i * d..(i + 1) * d], tl)).sum()
            }
            ModelKind::RotatE => -l2_norm(&self.rotate_residual(t)),
        }
    }

    /// Scores of `(head, relation, e)` for every entity `e`.
    pub fn score_tails(&self, head: usize, relation: usize) -> Vec<f64> {
        (0..self.num_entities())
            .map(|e| self.score(Triple::new(head, relation, e)))
            .collect()
    }

    /// Scores of `(e, relation, tail)` for every entity `e`.
    pub fn score_heads(&self, relation: usize, tail: usize) -> Vec<f64> {
        (0..self.num_entities())
            .map(|e| self.score(Triple::new(e, relation, tail)))
            .collect()
    }

    fn project(&self, entity: &[f64], relation: usize) -> Vec<f64> {
        let k = self.rel_dim;
        let m = self.projection.as_ref().expect("transr projection").row(relation);
        let mut out = vec![0.0; k];
        for (i, &x) in entity.iter().enumerate() {
            crate::linalg::axpy(x, &m[i * k..(i + 1) * k], &mut out);
        }
        out
    }

    /// `h·M_r + r − t·M_r`
    fn transr_residual(&self, t: Triple) -> Vec<f64> {
        let hp = self.project(self.entity.row(t.head), t.relation);
        let tp = self.project(self.entity.row(t.tail), t.relation);
        let r = self.relation.row(t.relation);
        (0..self.rel_dim).map(|i| hp[i] + r[i] - tp[i]).collect()
    }

    /// Real parts then imaginary parts of `h ∘ e^{iθ} − t`.
    fn rotate_residual(&self, t: Triple) -> Vec<f64> {
        let d = self.dim;
        let h = self.entity.row(t.head);
        let tl = self.entity.row(t.tail);
        let theta = self.relation.row(t.relation);
        let mut out = vec![0.0; 2 * d];
        for i in 0..d {
            let (s, c) = theta[i].sin_cos();
            let (a, b) = (h[i], h[d + i]);
            out[i] = a * c - b * s - tl[i];
            out[d + i] = a * s + b * c - tl[d + i];
        }
        out
    }

    /// Analytic gradient of [`EmbeddingModel::score`]. Norm-based scores use
    /// the zero subgradient where the residual (component) is exactly zero.
    pub fn score_gradient(&self, t: Triple) -> ScoreGradient {
        let d = self.dim;
        let h = self.entity.row(t.head);
        let tl = self.entity.row(t.tail);
        let r = self.relation.row(t.relation);
        let (gh, gr, gt, gp): (Vec<f64>, Vec<f64>, Vec<f64>, Option<Vec<f64>>) = match self.kind {
            ModelKind::TransEL1 => {
                let s: Vec<f64> = (0..d).map(|i| sign(h[i] + r[i] - tl[i])).collect();
                let neg: Vec<f64> = s.iter().map(|v| -v).collect();
                (neg.clone(), neg, s, None)
            }
            ModelKind::TransEL2 => {
                let e: Vec<f64> = (0..d).map(|i| h[i] + r[i] - tl[i]).collect();
                let g = unit_or_zero(&e, -1.0);
                let gt = g.iter().map(|v| -v).collect();
                (g.clone(), g, gt, None)
            }
            ModelKind::TransR => {
                let k = self.rel_dim;
                let e = self.transr_residual(t);
                let g = unit_or_zero(&e, -1.0);
                let m = self.projection.as_ref().unwrap().row(t.relation);
                let gh: Vec<f64> = (0..d).map(|i| dot(&m[i * k..(i + 1) * k], &g)).collect();
                let gt = gh.iter().map(|v| -v).collect();
                let mut gm = vec![0.0; d * k];
                for i in 0..d {
                    let diff = h[i] - tl[i];
                    for j in 0..k {
                        gm[i * k + j] = diff * g[j];
                    }
                }
                (gh, g, gt, Some(gm))
            }
            ModelKind::DistMult => (
                (0..d).map(|i| r[i] * tl[i]).collect(),
                (0..d).map(|i| h[i] * tl[i]).collect(),
                (0..d).map(|i| h[i] * r[i]).collect(),
                None,
            ),
            ModelKind::Rescal => {
                let gh = (0..d).map(|i| dot(&r[i * d..(i + 1) * d], tl)).collect();
                let gt = (0..d)
                    .map(|j| (0..d).map(|i| h[i] * r[i * d + j]).sum())
                    .collect();
                let mut gm = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..d {
                        gm[i * d + j] = h[i] * tl[j];
                    }
                }
                (gh, gm, gt, None)
            }
            ModelKind::RotatE => {
                let res = self.rotate_residual(t);
                let g = unit_or_zero(&res, -1.0);
                let mut gh = vec![0.0; 2 * d];
                let mut gtheta = vec![0.0; d];
                let gt: Vec<f64> = g.iter().map(|v| -v).collect();
                for i in 0..d {
                    let (s, c) = r[i].sin_cos();
                    let (a, b) = (h[i], h[d + i]);
                    let (gx, gy) = (g[i], g[d + i]);
                    gh[i] = gx * c + gy * s;
                    gh[d + i] = -gx * s + gy * c;
                    gtheta[i] = gx * (-a * s - b * c) + gy * (a * c - b * s);
                }
                (gh, gtheta, gt, None)
            }
        };
        let entity = if t.head == t.tail {
            vec![(t.head, gh.iter().zip(&gt).map(|(a, b)| a + b).collect())]
        } else {
            vec![(t.head, gh), (t.tail, gt)]
        };
        ScoreGradient {
            entity,
            relation: (t.relation, gr),
            projection: gp.map(|g| (t.relation, g)),
        }
    }

    /// Project every entity row onto the unit L2 sphere (zero rows are left as is).
    pub fn renormalize_entities(&mut self) {
        for i in 0..self.entity.rows() {
            let row = self.entity.row_mut(i);
            let norm = l2_norm(row);
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `scale · v/‖v‖`, or zeros when `v = 0`.
fn unit_or_zero(v: &[f64], scale: f64) -> Vec<f64> {
    let n = l2_norm(v);
    if n == 0.0 {
        vec![0.0; v.len()]
    } else {
        v.iter().map(|x| scale * x / n).collect()
    }
}
