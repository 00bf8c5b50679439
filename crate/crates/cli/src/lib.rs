//! Driver for the `clickcraft` command-line tool.
//!
//! A run reads a versioned JSON configuration, applies command-line
//! overrides, executes one protocol and writes deterministic CSV or JSON
//! files. The library half exists so the pieces can be tested without
//! spawning processes.

pub mod config;
pub mod error;
pub mod format;
pub mod run;

pub use config::{Format, Overrides, Protocol, RunConfig};
pub use error::CliError;
pub use run::{execute, manifest, Artifact};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "CLICKCRAFT_THREADS";
