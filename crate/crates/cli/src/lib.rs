//! Command-line driver for training, evaluating and serving compositional
//! code models.

pub mod commands;
pub mod config;

pub use commands::{CliError, CliResult};
pub use config::RunConfig;
