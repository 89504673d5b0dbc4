//! File-level commands behind the `veason` executable.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

pub use config::RunConfig;
pub use error::CliError;
