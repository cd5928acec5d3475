//! Experiment runner: generation, annotation, evaluation and sweeps driven
//! by a single TOML config.

pub mod commands;
pub mod config;

pub use commands::{cmd_evaluate, cmd_generate, cmd_sweep, exit_code, worlds_listing, Manifest};
pub use config::{ExperimentConfig, ResolvedConfig};
