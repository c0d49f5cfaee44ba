//! Configuration and dispatch for the `ptmatch` command-line tool.

pub mod config;
pub mod run;

pub use config::{parse_config, Command, ConfigError, ExperimentConfig};
pub use run::{run, Outcome, RunError};
