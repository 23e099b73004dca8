//! Command-line front end: config handling, the experiment pipeline and subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use commands::run_cli;
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use pipeline::{run_experiment, ExperimentReport};
