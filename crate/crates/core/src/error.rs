use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("semantic error: {0}")]
    Semantic(String),

    #[error("graph contains a cycle")]
    Cycle,

    #[error("schema error: {0}")]
    Schema(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("singular linear system")]
    SingularSystem,

    #[error("empty training history")]
    EmptyHistory,

    #[error("empty input")]
    EmptyInput,

    #[error("missing statistics for {0}")]
    MissingStats(String),

    #[error("type error at row {row}, column `{column}`: {msg}")]
    Type {
        row: usize,
        column: String,
        msg: String,
    },

    #[error("execution budget of {budget} steps exceeded")]
    BudgetExceeded { budget: u64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("query {index} failed: {source}\n  {sql}")]
    Query {
        index: usize,
        sql: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from user configuration rather than from
    /// running a workload.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json(_))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(pos: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            pos,
            msg: msg.into(),
        }
    }
}
