use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("graph is empty")]
    EmptyGraph,

    #[error("node {node} has no neighbours (enable LCC extraction to drop isolated nodes)")]
    IsolatedNode { node: usize },

    #[error("invalid edge perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("step index {k} out of range 1..={steps}")]
    StepOutOfRange { k: usize, steps: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph of {n} nodes exceeds the limit of {limit}")]
    SizeLimit { n: usize, limit: usize },

    #[error("infeasible calibration: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}
