//! Command-line front end over `driftlearn-core`: JSON-configured runs with
//! four subcommands — `simulate`, `fit`, `evaluate`, `reproduce` — wired so
//! the trajectory CSV is the only interchange format between them.
//!
//! Everything here is deterministic given the seeds in the configuration:
//! repeated runs produce byte-identical CSV and JSON outputs.

pub mod commands;
pub mod config;
pub mod io;

use std::fmt;

/// Process-level failure classes, one per exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit 1: the configuration does not parse or violates an invariant.
    Config(String),
    /// Exit 2: a numeric routine failed; the message names the operation.
    Numeric(String),
    /// Exit 3: file-system failure; the message names the path.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<driftlearn_core::Error> for CliError {
    fn from(err: driftlearn_core::Error) -> Self {
        use driftlearn_core::Error;
        match &err {
            Error::Numeric { op, .. } | Error::Diverged { op, .. } => {
                CliError::Numeric(format!("driftlearn-core::{op}: {err}"))
            }
            _ => CliError::Config(err.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
