//! Experiment configuration, drivers and exporters for the `qfi` binary.

pub mod config;
pub mod error;
pub mod experiment;
pub mod export;
pub mod matrix_io;

pub use config::{ExperimentConfig, Format, Model, SyntheticParams, SyntheticRegime};
pub use error::CliError;
pub use experiment::{run_experiment, ExperimentReport};
pub use export::export;
