//! Experiment front end: configuration parsing, CSV output, and the
//! `run` / `compare` / `converge` / `check` commands.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{cmd_check, cmd_compare, cmd_converge, cmd_run, CliError};
pub use config::{parse_config, parse_config_with_overrides, ConfigError, ExperimentConfig};
