//! Configuration parsing, artifact output and subcommand drivers for the
//! `thermistor` binary.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, Command, Outcome, RunError};
pub use config::{parse_config, ConfigError, RunConfig};
