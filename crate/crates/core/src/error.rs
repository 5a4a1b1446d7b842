use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid mismatch: operands live on different grids")]
    GridMismatch,
    #[error("cell index {index} out of range for grid with {cells} cells")]
    IndexOutOfRange { index: usize, cells: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid function: {0}")]
    InvalidFunction(String),
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("existence condition violated: {0}")]
    ExistenceViolation(String),
    #[error("series did not converge within {0} terms")]
    NoConvergence(usize),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("operator is not an infinity-norm contraction (bound {0})")]
    NotAContraction(f64),
    #[error("rewrite budget exceeded: more than {0} live terms")]
    BudgetExceeded(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
