use serde::{Deserialize, Serialize};

use super::adjacency::{sgc_features, NormalizedAdjacency, RelationAdjacency};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GnnKind {
    Gcn,
    Rgcn,
    Sgc,
}

impl GnnKind {
    pub const ALL: [GnnKind; 3] = [GnnKind::Gcn, GnnKind::Rgcn, GnnKind::Sgc];

    pub fn name(self) -> &'static str {
        match self {
            GnnKind::Gcn => "gcn",
            GnnKind::Rgcn => "rgcn",
            GnnKind::Sgc => "sgc",
        }
    }
}

impl std::fmt::Display for GnnKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GnnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GnnKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown gnn model `{s}`")))
    }
}

/// Weights of one of the fixed architectures, stored as a flat tensor list.
///
/// Layouts (row-vector convention, `H' = Â H W`):
/// - gcn: `[W⁰ (d_in×h), W¹ (h×d_out)]`
/// - sgc: `[W (d_in×d_out)]`
/// - rgcn: per layer `[A (R×B), V₁ … V_B, W_self]`, then the learned input
///   table (n×h) when no features are supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnParams {
    pub kind: GnnKind,
    pub sgc_k: usize,
    pub num_bases: usize,
    pub learned_input: bool,
    pub tensors: Vec<Matrix>,
}

impl GnnParams {
    pub fn gcn(d_in: usize, hidden: usize, d_out: usize, rng: &mut Rng) -> Self {
        GnnParams {
            kind: GnnKind::Gcn,
            sgc_k: 0,
            num_bases: 0,
            learned_input: false,
            tensors: vec![Matrix::glorot(d_in, hidden, rng), Matrix::glorot(hidden, d_out, rng)],
        }
    }

    pub fn sgc(d_in: usize, d_out: usize, k: usize, rng: &mut Rng) -> Self {
        GnnParams {
            kind: GnnKind::Sgc,
            sgc_k: k,
            num_bases: 0,
            learned_input: false,
            tensors: vec![Matrix::glorot(d_in, d_out, rng)],
        }
    }

    /// With `d_in = None` the first layer reads a learned `n×hidden` table.
    pub fn rgcn(
        d_in: Option<usize>,
        n_nodes: usize,
        n_relations: usize,
        num_bases: usize,
        hidden: usize,
        d_out: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if num_bases == 0 || num_bases > n_relations.max(1) {
            return Err(Error::invalid(format!(
                "rgcn needs 1 ≤ bases ≤ {} relations, got {num_bases}",
                n_relations
            )));
        }
        let width_in = d_in.unwrap_or(hidden);
        let mut tensors = Vec::with_capacity(2 * (num_bases + 2) + 1);
        for (a, b) in [(width_in, hidden), (hidden, d_out)] {
            tensors.push(Matrix::glorot(n_relations, num_bases, rng));
            for _ in 0..num_bases {
                tensors.push(Matrix::glorot(a, b, rng));
            }
            tensors.push(Matrix::glorot(a, b, rng));
        }
        if d_in.is_none() {
            tensors.push(Matrix::glorot(n_nodes, hidden, rng));
        }
        Ok(GnnParams {
            kind: GnnKind::Rgcn,
            sgc_k: 0,
            num_bases,
            learned_input: d_in.is_none(),
            tensors,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Matrix::is_finite)
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(|t| t.data().len()).sum()
    }

    pub fn zeros_like(&self) -> Vec<Matrix> {
        self.tensors.iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect()
    }

    pub fn output_dim(&self) -> usize {
        match self.kind {
            GnnKind::Gcn => self.tensors[1].cols(),
            GnnKind::Sgc => self.tensors[0].cols(),
            GnnKind::Rgcn => self.tensors[2 * (self.num_bases + 2) - 1].cols(),
        }
    }

    fn rgcn_layer(&self, layer: usize) -> RgcnLayer<'_> {
        let stride = self.num_bases + 2;
        let block = &self.tensors[layer * stride..(layer + 1) * stride];
        RgcnLayer {
            coeffs: &block[0],
            bases: &block[1..=self.num_bases],
            self_weight: &block[self.num_bases + 1],
        }
    }

    fn input_table(&self) -> Option<&Matrix> {
        self.learned_input.then(|| &self.tensors[2 * (self.num_bases + 2)])
    }
}

/// Propagation operators a model may need; only the one matching the
/// model kind has to be present.
#[derive(Debug, Clone, Copy)]
pub struct GraphOperators<'a> {
    pub adjacency: Option<&'a NormalizedAdjacency>,
    pub relations: Option<&'a RelationAdjacency>,
}

impl<'a> GraphOperators<'a> {
    pub fn normalized(adj: &'a NormalizedAdjacency) -> Self {
        GraphOperators {
            adjacency: Some(adj),
            relations: None,
        }
    }

    pub fn relational(rel: &'a RelationAdjacency) -> Self {
        GraphOperators {
            adjacency: None,
            relations: Some(rel),
        }
    }

    fn adjacency(&self) -> Result<&'a NormalizedAdjacency> {
        self.adjacency
            .ok_or_else(|| Error::invalid("model needs a normalized adjacency"))
    }

    fn relations(&self) -> Result<&'a RelationAdjacency> {
        self.relations
            .ok_or_else(|| Error::invalid("rgcn needs per-relation adjacency"))
    }
}

struct RgcnLayer<'a> {
    coeffs: &'a Matrix,
    bases: &'a [Matrix],
    self_weight: &'a Matrix,
}

impl RgcnLayer<'_> {
    fn relation_weight(&self, r: usize) -> Matrix {
        let mut w = Matrix::zeros(self.self_weight.rows(), self.self_weight.cols());
        for (b, v) in self.bases.iter().enumerate() {
            let a = self.coeffs[(r, b)];
            if a != 0.0 {
                for (x, y) in w.data_mut().iter_mut().zip(v.data()) {
                    *x += a * y;
                }
            }
        }
        w
    }
}

#[derive(Debug, Clone)]
struct RgcnCache {
    input: Matrix,
    messages: Vec<Matrix>,
    weights: Vec<Matrix>,
}

#[derive(Debug, Clone)]
enum Cache {
    Gcn { ax: Matrix, pre: Matrix, ah: Matrix },
    Sgc { s: Matrix },
    Rgcn { layers: [RgcnCache; 2], pre: Matrix },
}

/// Output of a forward pass plus what the backward pass needs.
#[derive(Debug, Clone)]
pub struct Forward {
    pub output: Matrix,
    cache: Cache,
}

fn relu(m: &Matrix) -> Matrix {
    let data = m.data().iter().map(|&v| v.max(0.0)).collect();
    Matrix::from_vec(m.rows(), m.cols(), data)
}

fn relu_backward(grad: &mut Matrix, pre: &Matrix) {
    for (g, &z) in grad.data_mut().iter_mut().zip(pre.data()) {
        if z <= 0.0 {
            *g = 0.0;
        }
    }
}

fn check_input(x: &Matrix, n: usize, d: usize) -> Result<()> {
    if x.shape() != (n, d) {
        return Err(Error::shape(format!(
            "features are {}×{}, expected {n}×{d}",
            x.rows(),
            x.cols()
        )));
    }
    Ok(())
}

fn rgcn_layer_forward(layer: &RgcnLayer<'_>, rel: &RelationAdjacency, h: &Matrix) -> Result<(Matrix, RgcnCache)> {
    if layer.coeffs.rows() != rel.num_relations() {
        return Err(Error::shape(format!(
            "{} relation coefficients for {} relations",
            layer.coeffs.rows(),
            rel.num_relations()
        )));
    }
    check_input(h, rel.n(), layer.self_weight.rows())?;
    let mut out = h.matmul(layer.self_weight);
    let mut messages = Vec::with_capacity(rel.num_relations());
    let mut weights = Vec::with_capacity(rel.num_relations());
    for (r, op) in rel.operators().iter().enumerate() {
        let p = op.mul_dense(h);
        let w = layer.relation_weight(r);
        if op.nnz() > 0 {
            out.add_assign(&p.matmul(&w));
        }
        messages.push(p);
        weights.push(w);
    }
    Ok((
        out,
        RgcnCache {
            input: h.clone(),
            messages,
            weights,
        },
    ))
}

/// Writes the layer's parameter gradients into `grads` (layout `[A, V…, W_self]`)
/// and returns the gradient with respect to the layer input.
fn rgcn_layer_backward(
    layer: &RgcnLayer<'_>,
    rel: &RelationAdjacency,
    cache: &RgcnCache,
    d_out: &Matrix,
    grads: &mut [Matrix],
) -> Matrix {
    let nb = layer.bases.len();
    grads[nb + 1].add_assign(&cache.input.t_matmul(d_out));
    let mut d_in = d_out.matmul_t(layer.self_weight);
    for (r, op) in rel.operators().iter().enumerate() {
        if op.nnz() == 0 {
            continue;
        }
        let g_r = cache.messages[r].t_matmul(d_out);
        for (b, v) in layer.bases.iter().enumerate() {
            let a = layer.coeffs[(r, b)];
            for (x, y) in grads[1 + b].data_mut().iter_mut().zip(g_r.data()) {
                *x += a * y;
            }
            let i = r * nb + b;
            grads[0].data_mut()[i] += g_r.frobenius_dot(v);
        }
        d_in.add_assign(&op.t_mul_dense(&d_out.matmul_t(&cache.weights[r])));
    }
    d_in
}

/// `logits = Â relu(Â X W⁰) W¹`.
pub fn gcn_forward(params: &GnnParams, adj: &NormalizedAdjacency, x: &Matrix) -> Result<Forward> {
    if params.kind != GnnKind::Gcn {
        return Err(Error::invalid("gcn_forward needs gcn parameters"));
    }
    let (w0, w1) = (&params.tensors[0], &params.tensors[1]);
    check_input(x, adj.n(), w0.rows())?;
    let ax = adj.mul(x)?;
    let pre = ax.matmul(w0);
    let ah = adj.mul(&relu(&pre))?;
    let output = ah.matmul(w1);
    Ok(Forward {
        output,
        cache: Cache::Gcn { ax, pre, ah },
    })
}

/// Two basis-decomposed relational layers with a relu between them.
pub fn rgcn_forward(params: &GnnParams, rel: &RelationAdjacency, x: Option<&Matrix>) -> Result<Forward> {
    if params.kind != GnnKind::Rgcn {
        return Err(Error::invalid("rgcn_forward needs rgcn parameters"));
    }
    let input = match (params.input_table(), x) {
        (Some(table), _) => table,
        (None, Some(x)) => x,
        (None, None) => return Err(Error::invalid("rgcn without learned input needs features")),
    };
    let (pre, c0) = rgcn_layer_forward(&params.rgcn_layer(0), rel, input)?;
    let (output, c1) = rgcn_layer_forward(&params.rgcn_layer(1), rel, &relu(&pre))?;
    Ok(Forward {
        output,
        cache: Cache::Rgcn { layers: [c0, c1], pre },
    })
}

/// Linear model on `Â^K X`.
pub fn sgc_forward(params: &GnnParams, adj: &NormalizedAdjacency, x: &Matrix) -> Result<Forward> {
    if params.kind != GnnKind::Sgc {
        return Err(Error::invalid("sgc_forward needs sgc parameters"));
    }
    check_input(x, adj.n(), params.tensors[0].rows())?;
    let s = sgc_features(adj, x, params.sgc_k)?;
    Ok(Forward {
        output: s.matmul(&params.tensors[0]),
        cache: Cache::Sgc { s },
    })
}

pub fn forward(params: &GnnParams, ops: GraphOperators<'_>, x: Option<&Matrix>) -> Result<Forward> {
    let need_x = || x.ok_or_else(|| Error::invalid(format!("{} needs node features", params.kind)));
    match params.kind {
        GnnKind::Gcn => gcn_forward(params, ops.adjacency()?, need_x()?),
        GnnKind::Sgc => sgc_forward(params, ops.adjacency()?, need_x()?),
        GnnKind::Rgcn => rgcn_forward(params, ops.relations()?, x),
    }
}

/// Gradients of every tensor given `∂L/∂output`.
pub fn backward(params: &GnnParams, ops: GraphOperators<'_>, fwd: &Forward, d_out: &Matrix) -> Result<Vec<Matrix>> {
    if d_out.shape() != fwd.output.shape() {
        return Err(Error::shape("output gradient shape differs from output"));
    }
    let mut grads = params.zeros_like();
    match &fwd.cache {
        Cache::Gcn { ax, pre, ah } => {
            let adj = ops.adjacency()?;
            grads[1] = ah.t_matmul(d_out);
            let mut d_h = adj.matrix().t_mul_dense(&d_out.matmul_t(&params.tensors[1]));
            relu_backward(&mut d_h, pre);
            grads[0] = ax.t_matmul(&d_h);
        }
        Cache::Sgc { s } => grads[0] = s.t_matmul(d_out),
        Cache::Rgcn { layers, pre } => {
            let rel = ops.relations()?;
            let stride = params.num_bases + 2;
            let (first, rest) = grads.split_at_mut(stride);
            let mut d_h = rgcn_layer_backward(&params.rgcn_layer(1), rel, &layers[1], d_out, &mut rest[..stride]);
            relu_backward(&mut d_h, pre);
            let d_x = rgcn_layer_backward(&params.rgcn_layer(0), rel, &layers[0], &d_h, first);
            if params.learned_input {
                rest[stride] = d_x;
            }
        }
    }
    Ok(grads)
}
