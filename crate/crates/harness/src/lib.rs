//! Command-line experiment harness: configuration, problem construction,
//! runs, rate fits, parameter sweeps and data generation.

pub mod build;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_generate, cmd_rate, cmd_run, cmd_sweep, RateReport, RunOutcome, SweepCell};
pub use config::Config;
pub use error::HarnessError;
