//! Batch driver: reads a scenario file, runs the well-posedness gate and the
//! time stepper, and writes plain-text results.

pub mod config;
pub mod error;
pub mod run;

pub use config::ScenarioConfig;
pub use error::CliError;
pub use run::{run, Command, RunOptions, RunSummary};
