use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{name}`: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("graph must have at least one node")]
    EmptyGraph,

    #[error("node index {index} out of range for graph with {node_count} nodes")]
    NodeOutOfRange { index: usize, node_count: usize },

    #[error("invalid edge ({0}, {1}): self-loops are not allowed")]
    SelfLoop(usize, usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("label vector has length {labels}, expected {node_count}")]
    LabelLength { labels: usize, node_count: usize },

    #[error("state vector has length {states}, graph has {node_count} nodes")]
    SizeMismatch { states: usize, node_count: usize },

    #[error("cannot seed {what} into an empty {scope} scope")]
    EmptyScope {
        what: &'static str,
        scope: &'static str,
    },

    #[error("exact enumeration limited to n <= {max_nodes} and steps <= {max_steps} (got n = {nodes}, steps = {steps})")]
    Intractable {
        nodes: usize,
        steps: usize,
        max_nodes: usize,
        max_steps: usize,
    },

    #[error("sweep grid is empty: `{0}` has no values")]
    EmptyAxis(&'static str),

    #[error("time series needs a single grid point, got {0}")]
    NotSinglePoint(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Checks that `value` is a probability in `[0, 1]`.
pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie in [0, 1]",
        })
    }
}
