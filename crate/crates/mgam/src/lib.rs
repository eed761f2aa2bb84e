//! File formats and command line for missingness-aware sparse GAMs.
//!
//! The algorithms live in `mgam-core`; this crate reads and writes CSV
//! tables and JSON documents and wires the pipeline into subcommands.

pub mod cli;
pub mod formats;
pub mod io;
pub mod theory_report;

use std::fmt;

use mgam_core::Error;

/// Failure of a subcommand; rendered as one `error[<kind>]: ...` line.
#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Csv(String),
    Io(String),
    /// Some claims of `theory-check` failed.
    Claims(usize),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => match e {
                Error::InvalidDataset(_) | Error::InvalidEncoding(_) | Error::Parse { .. } | Error::Label { .. } => {
                    "data"
                }
                Error::Config(_) | Error::Split(_) | Error::Stratify(_) | Error::UnknownGenerator(_) => "config",
                Error::Dimension(_) | Error::Orphan(_) => "model",
                Error::TooLarge(_) | Error::Imputer(_) => "theory",
            },
            CliError::Csv(_) => "csv",
            CliError::Io(_) => "io",
            CliError::Claims(_) => "check",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Csv(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Claims(n) => write!(f, "{n} claim(s) failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Csv(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
