//! Seeded experiment runner for the `maxent-core` algorithms: config
//! parsing, replicate execution on a worker pool, CSV output and figure
//! export.

pub mod config;
mod error;
pub mod eval;
pub mod export;
pub mod output;
pub mod run;

pub use config::{AlgorithmConfig, AlgorithmKind, EnvConfig, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use run::{run_experiment, RunReport};
