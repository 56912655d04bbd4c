use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem with a model (row sums, ranges, kinds).
    #[error("model error: {0}")]
    Model(String),

    #[error("invalid scheduler: {0}")]
    InvalidScheduler(String),

    #[error("state space exceeds the configured limit of {limit} states ({explored} explored)")]
    SizeLimit { limit: usize, explored: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Text input that failed to parse; `line`/`column` are 1-based.
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Well-formed input that fails a semantic rule (undefined names, types, ...).
    #[error("semantic error: {0}")]
    Semantic(String),

    /// Input that is malformed with respect to a file schema; `path` points into the document.
    #[error("format error at {path}: {message}")]
    Format { path: String, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no convergence after {iterations} iterations (last difference {last_difference:e})")]
    NonConvergence {
        iterations: usize,
        last_difference: f64,
        last_iterate: Vec<f64>,
    },

    #[error("linear program too large: {variables} variables (limit {limit}); use the LP-file export")]
    TooLarge { variables: usize, limit: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn format(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
