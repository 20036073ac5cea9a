//! Library surface of the command-line harness, split out so integration
//! tests can drive the pipeline without spawning processes.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;

pub use commands::{cmd_filter, cmd_report, cmd_simulate};
pub use config::RunConfig;
pub use error::CliError;
