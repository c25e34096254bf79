use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("position ({x}, {y}) is outside the map")]
    OffMap { x: f64, y: f64 },
    #[error("unknown layer `{0}`")]
    MissingLayer(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Qp(#[from] step_qp::QpError),
}

pub type Result<T> = std::result::Result<T, CoreError>;
