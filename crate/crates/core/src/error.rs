use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The metric (after regularization) could not be inverted at a grid node.
    #[error("degenerate metric at node {node}: {detail}")]
    DegenerateMetric { node: usize, detail: String },

    #[error("degenerate coordinate plane ({i}, {j}): g_ii g_jj - g_ij^2 = {denominator:e}")]
    DegeneratePlane { i: usize, j: usize, denominator: f64 },

    /// Local metric estimation failed (neighbors do not span the tangent space).
    #[error("metric estimation failed at node {node}: {detail}")]
    Estimation { node: usize, detail: String },

    #[error("external reducer: {0}")]
    Protocol(#[from] ProtocolError),

    #[error("scoring failed: {0}")]
    Scoring(String),

    #[error("tuning failed: {0}")]
    Tuning(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attaches a grid node index to node-local failures.
    pub fn at_node(self, node: usize) -> Self {
        match self {
            Error::DegenerateMetric { detail, .. } => Error::DegenerateMetric { node, detail },
            Error::Estimation { detail, .. } => Error::Estimation { node, detail },
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures of the subprocess reducer protocol. Each carries whatever the
/// child wrote to stdout/stderr.
#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("command exited with status {code:?}\nstderr:\n{stderr}")]
    NonZeroExit {
        code: Option<i32>,
        stdout: String,
        stderr: String,
    },

    #[error("command timed out after {timeout:?} and was killed\nstderr:\n{stderr}")]
    Timeout {
        timeout: Duration,
        stdout: String,
        stderr: String,
    },

    #[error("malformed output {path}: {detail}")]
    MalformedOutput { path: PathBuf, detail: String },

    #[error("output has {actual} rows, expected {expected}")]
    RowCountMismatch { expected: usize, actual: usize },

    #[error("could not launch command: {0}")]
    Launch(String),
}
