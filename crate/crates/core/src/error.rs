use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by every stage of the mining pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed code {raw} for `{attribute}`: digit {digit} at position {position} is not 0 or 1")]
    MalformedCode {
        attribute: String,
        raw: u64,
        position: usize,
        digit: u8,
    },
    #[error("code {raw} for `{attribute}` has more than {max_digits} digits")]
    CodeOverflow {
        attribute: String,
        raw: u64,
        max_digits: usize,
    },
    #[error("unknown flag `{flag}` for `{attribute}`")]
    UnknownFlag { attribute: String, flag: String },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("conflicting descriptors for shared attribute `{0}`")]
    SchemaConflict(String),
    #[error("relations `{left}` and `{right}` share no attribute; cartesian products are refused")]
    DisjointSchemas { left: String, right: String },
    #[error("missing value in `{0}`; impute before this stage")]
    UnimputedData(String),
    #[error("attribute `{0}` is a coded-flag field; expand it first")]
    UnexpandedField(String),
    #[error("policy precondition failed: {0}")]
    PolicyPrecondition(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid record at row {row}: {detail}")]
    InvalidRecord { row: usize, detail: String },
    #[error("{path}: {cause}")]
    Io {
        path: PathBuf,
        cause: std::io::Error,
    },
    #[error("{path}: {cause}")]
    Csv {
        path: PathBuf,
        cause: csv::Error,
    },
    #[error("{path}: {cause}")]
    Json {
        path: PathBuf,
        cause: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause: source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            cause: source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            cause: source,
        }
    }
}
