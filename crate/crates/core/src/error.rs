use std::path::PathBuf;

use thiserror::Error;

use crate::net::NodeId;

/// Problems found while reading or validating a run configuration.
#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },

    #[error("{field} out of range: {reason}")]
    OutOfRange { field: &'static str, reason: String },
}

impl ConfigError {
    pub(crate) fn range(field: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::OutOfRange {
            field,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("energy debit on dead node {0}")]
    DeadNode(NodeId),

    #[error("invalid energy cost {cost} for node {node}")]
    InvalidCost { node: NodeId, cost: f64 },

    #[error("sub-cluster behind gateway {0} has no orphans")]
    EmptySubCluster(NodeId),

    #[error("round {got} arrived out of order (expected {expected})")]
    OutOfOrderRound { expected: u32, got: u32 },

    #[error("round {round}: {what} increased from {previous} to {current}")]
    NonMonotone {
        round: u32,
        what: &'static str,
        previous: f64,
        current: f64,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> u8 {
        match self {
            SimError::Config(_) => 1,
            SimError::Io { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
