//! File formats, configuration and the command-line pipeline around
//! `tablelogit-core`.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod output;
pub mod synth;
pub mod table;

pub use commands::{run, Command, Outcome};
pub use config::{RunConfig, RunFlags};
pub use error::{CliError, Result};
