use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the planning engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in field `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate prior: no free cell carries positive mass")]
    DegeneratePrior,

    #[error("agent {agent} has an empty planning graph: {reason}")]
    EmptySubgraph { agent: usize, reason: String },

    #[error("agent {agent} received no probability mass; widen its preferred areas")]
    EmptySubPrior { agent: usize },

    #[error("pose ({x:.3}, {y:.3}) is not in free space")]
    InvalidPose { x: f64, y: f64 },

    #[error("node {node} of agent {agent} has no neighbours")]
    DeadEnd { agent: usize, node: usize },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

impl Error {
    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
