//! Command-line laboratory around [`calderon_core`]: config-driven
//! experiments reproducing the artifact's recovery, stability,
//! noise-model-comparison, divergence and truncation studies, with
//! machine-readable digest-stamped outputs.

pub mod config;
pub mod digest;
pub mod experiments;
pub mod io;
pub mod workers;

pub use config::{Experiment, ExperimentConfig, RawConfig};
pub use experiments::{run, CheckReport};
