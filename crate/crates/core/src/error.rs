use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("trajectory {0} never moves faster than speed_epsilon; heading undefined")]
    AllStationary(String),

    #[error("trajectories differ in frame count or frame rate: {0}")]
    MismatchedLengths(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient overlap at offset ({di}, {dj})")]
    InsufficientOverlap { di: i64, dj: i64 },

    #[error("affinity matrix is all zero")]
    ZeroMatrix,

    #[error("power iteration did not converge within {iterations} iterations")]
    NoConvergence { lambda: f64, vector: Vec<f64>, iterations: usize },

    #[error("more egocentric videos ({n_ego}) than top-view viewers ({n_top})")]
    TooManyEgo { n_ego: usize, n_top: usize },

    #[error("arena too small for the configured motion: {0}")]
    InfeasibleMotion(String),

    #[error("malformed {file}: {msg}")]
    Format { file: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
