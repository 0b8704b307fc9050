//! Experiment harness: configuration files, seeded Monte-Carlo sweeps and
//! CSV/trace output.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{load_config, parse_config, Config, ConfigError, Experiment, ExperimentSpec};
pub use experiment::{run_experiment, ExperimentOutput, TrialOutcome, TrialStatus};
