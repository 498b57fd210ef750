use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The Fisher information is singular; `null_dim` counts the numerically
    /// zero eigenvalues of the equilibrated nuisance block.
    #[error("unidentifiable parameters: FIM is singular (null-space dimension {null_dim}, condition number {condition:.3e})")]
    Unidentifiable { null_dim: usize, condition: f64 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate mismatch: weighted beamformer combination vanishes")]
    DegenerateMismatch,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
