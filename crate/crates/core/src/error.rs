use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum KcgeError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid party subset: {0}")]
    InvalidSubset(String),

    #[error("state is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is not unitary (max |U†U - 1| = {0:e})")]
    NotUnitary(f64),

    #[error("not disentanglable with this cut: Schmidt rank {rank} exceeds threshold {threshold}")]
    NotDisentanglable { rank: usize, threshold: usize },

    #[error("channel violates Kraus completeness (max deviation {0:e})")]
    IncompleteChannel(f64),

    #[error("connection level k = {k} out of range for n = {n} parties")]
    LevelOutOfRange { k: usize, n: usize },

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl KcgeError {
    /// True for refusals caused by size limits rather than bad input.
    pub fn is_budget(&self) -> bool {
        matches!(self, KcgeError::BudgetExceeded(_))
    }
}

pub type Result<T> = std::result::Result<T, KcgeError>;
