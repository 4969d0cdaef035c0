use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value {value} outside of allowed range [{low}, {high}] for {what}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        low: f64,
        high: f64,
    },

    #[error("every candidate in generation {generation} has a non-finite cost")]
    AllCostsNonFinite { generation: u64 },

    #[error("unknown parameter name `{0}`")]
    UnknownParameter(String),

    #[error("generation {generation} missing from covariance series")]
    MissingGeneration { generation: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("fixture error for {path}: {reason}")]
    Fixture { path: PathBuf, reason: String },

    #[error("record error: {0}")]
    Record(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Csv(_) => 3,
            _ => 2,
        }
    }
}
