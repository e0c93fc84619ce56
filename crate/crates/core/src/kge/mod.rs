//! Knowledge graph embedding models and their margin-ranking trainer.

mod model;
mod train;

pub use model::{Block, EmbeddingModel, ModelKind, ScoreGradient};
pub use train::{margin_loss, train_kge, KgeTraining, TrainConfig};
