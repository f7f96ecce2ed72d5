//! Experiment driver for the duality-defect Ising chain simulator: TOML
//! configs, output formats and reproducible run records.

pub mod config;
pub mod formats;
pub mod runner;

pub use config::{Diagnostic, ExperimentConfig, ExperimentKind};
pub use runner::{run, RunOptions, RunRecord};
