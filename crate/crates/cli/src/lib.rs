//! Command-line driver: TOML run configurations and `key = value` reports.

pub mod config;
mod error;
pub mod run;

pub use config::{load_config, parse_config, RunConfig};
pub use error::CliError;
pub use run::{run, Command};
