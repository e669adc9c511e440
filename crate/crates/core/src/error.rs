use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("matrix is singular (pivot {pivot:.3e} against scale {scale:.3e})")]
    SingularMatrix { pivot: f64, scale: f64 },
    #[error("matrix has a non-finite entry")]
    NonfiniteEntry,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    BasisMismatch { expected: usize, found: usize },
    #[error("division by zero: {symbol} vanishes")]
    DivisionByZero { symbol: &'static str },
}

impl NumericError {
    pub fn code(&self) -> &'static str {
        match self {
            NumericError::SingularMatrix { .. } => "singular_matrix",
            NumericError::NonfiniteEntry => "nonfinite_entry",
            NumericError::BasisMismatch { .. } => "basis_mismatch",
            NumericError::DivisionByZero { .. } => "division_by_zero",
        }
    }
}
