//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("empty corpus: vocabulary needs at least one token")]
    EmptyCorpus,

    #[error("discretization requires a < 0, got a = {0}")]
    UnstableA(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("point lies on or outside the unit ball (norm = {0})")]
    OutOfBall(f64),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("k = {k} exceeds point count {n}")]
    InvalidK { k: usize, n: usize },

    #[error("train-mode batch norm needs at least 2 samples, got {0}")]
    BatchTooSmall(usize),

    #[error("label must be 0 or 1, got {0}")]
    InvalidLabel(f64),

    #[error("schedule step {step} outside [0, {total}]")]
    InvalidStep { step: usize, total: usize },

    #[error("training set needs both positive and negative labels")]
    DegenerateLabels,

    #[error("no trainable parameters: adapters are absent")]
    NoTrainableParams,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate review id: {0}")]
    DuplicateId(String),

    #[error("review {0} has an empty gold summary")]
    NoGold(String),

    #[error("review has no sentences")]
    EmptyReview,

    #[error("paraphrase request failed: {0}")]
    Paraphrase(String),

    #[error("paraphrase protocol violation: {0}")]
    Protocol(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("checkpoint rejected: {0}")]
    BadCheckpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
