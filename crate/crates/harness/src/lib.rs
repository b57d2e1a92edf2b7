//! Experiment orchestration for bandit importance sampling: configs, cached
//! reference sets, seed sweeps with MMD traces, sample-count matching, the
//! link-function and pool-size studies, and plot data.

pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod plots;
pub mod reference;
pub mod stats;
pub mod studies;
pub mod targets;

pub use config::{ExperimentConfig, Method, TargetSpec, SCHEMA_VERSION};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, run_experiment_with, samples_to_match, RunRecord};
pub use reference::{build_reference, Reference};
