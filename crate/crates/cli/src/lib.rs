//! Library half of the `orbfront` command-line tool.

pub mod commands;
pub mod config;
pub mod dataset;

pub use commands::*;
pub use config::{ConfigError, RunConfig};
