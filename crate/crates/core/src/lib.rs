//! Knowledge graph refinement toolkit: knowledge graph embeddings, small
//! graph neural networks, and the node classification, link prediction and
//! triple classification tasks built on them.

pub mod error;
pub mod downstream;
pub mod eval;
pub mod features;
pub mod gnn;
pub mod graph;
pub mod kge;
pub mod linalg;
pub mod optim;
pub mod pca;
pub mod report;
pub mod rng;
pub mod search;

pub use error::{Error, Result};
pub use features::{FeatureKind, FeatureMatrix};
pub use graph::{KnowledgeGraph, Triple};
pub use linalg::Matrix;
