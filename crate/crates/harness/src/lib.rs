//! Experiment harness for decayed-MCMC filtering: seeded, reproducible
//! sweeps over models, decay schedules, sample budgets, and history lengths,
//! with CSV output and aggregation.
//!
//! The `decfilt` binary is a thin wrapper over [`config`], [`runner`], and
//! [`report`]; everything is callable as a library so experiments can run
//! inside tests.

use thiserror::Error;

pub mod config;
pub mod report;
pub mod runner;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// A config field failed validation; `path` names it.
    #[error("config {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Core(#[from] decfilt_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A result CSV could not be read or did not match the schema.
    #[error("csv: {0}")]
    Csv(String),
}
