//! Downstream tasks over any embedding or feature source.

mod classifier;
mod crossval;
mod metrics;
mod tasks;

pub use classifier::{classifier_objective, train_classifier, ClassifierConfig, ClassifierLoss, LinearClassifier};
pub use crossval::{kfold_crossval, kfold_partition, CrossValidation};
pub use metrics::{classification_metrics, ClassificationMetrics};
pub use tasks::{
    hadamard_edge_features, run_link_prediction_binary, run_node_classification, run_triple_classification,
    NodeTaskConfig,
};
