use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("node {node} out of range (graph has {num_nodes} nodes)")]
    NodeOutOfRange { node: usize, num_nodes: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("tape is stale: parameters changed since the forward pass")]
    StaleTape,

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("explanation diverged at epoch {epoch}: loss = {loss}")]
    ExplainDiverged { epoch: usize, loss: f64 },

    #[error("instance too large for exhaustive enumeration: {0}")]
    TooLarge(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate labels: {0}")]
    Degenerate(String),

    #[error("dataset format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
