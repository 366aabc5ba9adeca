//! Configuration, orchestration and report emission for the `mtwv` runner.

pub mod config;
pub mod export;
pub mod run;

pub use config::{ConfigError, RunConfig, Suite};
pub use run::{run, Report, RunError};
