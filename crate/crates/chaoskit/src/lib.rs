//! Configuration, file formats and command pipelines around
//! `chaoskit-core`.

pub mod checks;
pub mod commands;
pub mod config;
pub mod formats;
pub mod output;
pub mod report;

pub use commands::{dispatch, Command, Exit, Invocation, Outcome};
pub use config::{load_config, ConfigError, RunConfig};
