//! Two-layer GCN, basis-decomposed R-GCN and SGC with analytic gradients.

mod adjacency;
mod model;
mod train;

use std::io::{Read, Write};

pub use adjacency::{sgc_features, NormalizedAdjacency, RelationAdjacency};
pub use model::{backward, forward, gcn_forward, rgcn_forward, sgc_forward, Forward, GnnKind, GnnParams, GraphOperators};
pub use train::{
    edge_probabilities, evaluate_gnn_node, init_params, link_objective, node_objective,
    predict_classes, train_gnn_link, train_gnn_node, EdgeHead, GnnConfig, GnnLinkTraining, GnnNodeTraining,
    Propagation,
};

use crate::error::Result;

impl GnnParams {
    /// JSON checkpoint; floats round-trip bit-exactly.
    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        Ok(serde_json::from_reader(input)?)
    }
}
