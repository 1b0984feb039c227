use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("agent index {index} out of range for a game with {agents} agents")]
    AgentOutOfRange { index: usize, agents: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("adjacency matrix is not a symmetric 0/1 matrix with zero diagonal: {0}")]
    BadAdjacency(String),

    #[error("eigensolver did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("divergence at iteration {iteration}, agent {agent}: {detail}")]
    Divergence {
        iteration: usize,
        agent: usize,
        detail: String,
    },

    #[error("tau = {tau} is outside the admissible interval [0, {bound})")]
    TauOutOfRange { tau: f64, bound: f64 },

    #[error("window of {window} records exceeds the trace length {len}")]
    WindowTooLong { window: usize, len: usize },

    #[error("grid search over {dims} coordinates is infeasible (limit {limit}); use multistart descent")]
    DimensionTooHigh { dims: usize, limit: usize },

    #[error("partition function underflowed (log Z = {log_z}); rescale epsilon upward")]
    Underflow { log_z: f64 },

    #[error("all {starts} descent starts diverged")]
    AllStartsDiverged { starts: usize },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("graph format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
