use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("cost matrix is not symmetric at ({row}, {col}): {a} vs {b}")]
    Asymmetric { row: usize, col: usize, a: f64, b: f64 },
    #[error("lower bound exceeds upper bound on row {row}: {lower} > {upper}")]
    InvertedBounds { row: usize, lower: f64, upper: f64 },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("KKT matrix is not positive definite (pivot {pivot} at index {index})")]
    Factorization { index: usize, pivot: f64 },
    #[error("problem file parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] IoErrorWrapper),
}

/// `std::io::Error` is not `Clone`/`PartialEq`; keep the message only.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct IoErrorWrapper(pub String);

impl From<std::io::Error> for QpError {
    fn from(e: std::io::Error) -> Self {
        QpError::Io(IoErrorWrapper(e.to_string()))
    }
}
