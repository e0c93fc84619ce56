//! Library side of the `kgrefine` command: config parsing, the artifact
//! store and the stage pipeline.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
