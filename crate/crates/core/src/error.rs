use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label collision: space `{0}` appears more than once")]
    LabelCollision(String),
    #[error("unknown space label `{0}`")]
    UnknownLabel(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("operator is not Hermitian (residual {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (residual {0:e})")]
    NotUnitary(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("one-slot decomposition failed: reconstruction residual {0:e}")]
    Decomposition(f64),
    #[error("precondition violated: {what} (residual {residual:e})")]
    Precondition { what: String, residual: f64 },
    #[error("no feasible epsilon above {0:e}")]
    Infeasible(f64),
    #[error("rank did not stabilize within {0} samples")]
    NonConvergence(usize),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
