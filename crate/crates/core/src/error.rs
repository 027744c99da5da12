//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Two vectors were combined with incompatible dimensions.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A configuration value violates a documented constraint.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterate overflowed or became non-finite during a local round.
    #[error("trajectory diverged: agent {agent}, round {round}, local step {step}")]
    Divergence {
        agent: usize,
        round: u64,
        step: usize,
    },

    /// A divergence wrapped with the replication that produced it.
    #[error("replication {replication} failed: {source}")]
    ReplicationFailed {
        replication: usize,
        #[source]
        source: Box<Error>,
    },

    /// Several replications of one experiment diverged.
    #[error("{failed}/{total} replications diverged: [{details}]")]
    DivergenceReport {
        failed: usize,
        total: usize,
        details: String,
    },

    /// Config file could not be parsed.
    #[error("config parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True when the error (or its cause chain) is a divergence.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Divergence { .. } | Error::DivergenceReport { .. } => true,
            Error::ReplicationFailed { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}
