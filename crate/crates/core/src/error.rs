use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("duplicate record (project={project}, version={version}, file_id={file_id})")]
    DuplicateRecord {
        project: String,
        version: String,
        file_id: String,
    },

    #[error("tree depth {depth} exceeds limit {limit} in file {file}")]
    DepthExceeded {
        file: String,
        depth: usize,
        limit: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    /// A caller broke an operation's precondition. Distinct from bad user
    /// input: it indicates a bug in the calling code.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors that point at a defect in this library or its caller
    /// rather than at user-supplied data.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Contract(_) | Error::Internal(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
