use alloc::string::String;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid encoding map: {0}")]
    InvalidEncoding(String),
    #[error("row {row}, column `{column}`: cannot parse `{text}` as a number")]
    Parse { row: usize, column: String, text: String },
    #[error("row {row}: label `{text}` is not 0 or 1")]
    Label { row: usize, text: String },
    #[error("invalid split: {0}")]
    Split(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("cannot stratify: {0}")]
    Stratify(String),
    #[error("model does not match binning: {0}")]
    Orphan(String),
    #[error("degenerate imputer: {0}")]
    Imputer(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
}

pub type Result<T> = core::result::Result<T, Error>;
