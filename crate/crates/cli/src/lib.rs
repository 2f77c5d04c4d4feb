//! Command-line front end for the nanofiber trap model: config parsing,
//! data ingestion, and the JSON/CSV artifacts written by each subcommand.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod result;

pub use commands::{run, Command};
pub use config::{load, ExperimentConfig, LoadedConfig};
pub use error::CliError;
pub use result::ResultDocument;
