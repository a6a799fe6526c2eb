//! Experiment harness for `bsdep-core`: JSON configs, a runner that writes
//! CSV/JSON outputs with a manifest, and the `bsdep-lab` command line.

pub mod cli;
pub mod config;
pub mod runner;

pub use config::{parse_config, ConfigError, ExperimentConfig, ExperimentKind};
pub use runner::{run_experiment, Check, RunManifest};
