use std::path::PathBuf;

use thiserror::Error;

use crate::domain::{NodeId, Violation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid monitoring sample for node {node}: {}", join_violations(.violations))]
    InvalidSample {
        node: NodeId,
        violations: Vec<Violation>,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("model shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("cannot compute cosine similarity of a zero-norm vector")]
    ZeroNorm,

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("degenerate training data: {winners} winners out of {total} records")]
    DegenerateData { winners: usize, total: usize },

    #[error("exact Shapley refused for {players} players (cap {cap}); use the sampled estimator")]
    TooManyPlayers { players: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("chain invalid at height {height}: {reason}")]
    Chain { height: u64, reason: String },

    #[error("{path}:{line}: {reason}")]
    Trace {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("malformed model blob: {0}")]
    Blob(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}
