//! Experiment harness around `explore_core`: JSON configs, multi-seed runs,
//! randomized bound checks and CSV/SVG artifacts.

pub mod bounds;
pub mod config;
pub mod error;
pub mod experiment;
pub mod random;
pub mod svg;
pub mod table;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use experiment::{run_experiment, write_outputs};
