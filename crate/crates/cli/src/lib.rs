//! Experiment runner for branching Markov processes with absorption.
//!
//! A run reads one config file, validates every precondition, executes the
//! experiment and writes a CSV of rows plus a JSON summary.

pub mod app;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use app::{run, RunArgs};
pub use config::ExperimentConfig;
pub use error::CliError;
