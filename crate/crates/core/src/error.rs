use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("mesh too coarse for degree {degree}: max edge {max_edge:.4} > {limit:.4}; use level {required_level} or finer")]
    MeshTooCoarse {
        degree: u32,
        max_edge: f64,
        limit: f64,
        required_level: u32,
    },

    #[error("subdivision level {level} exceeds the limit of {max}")]
    LevelTooHigh { level: u32, max: u32 },

    #[error("root isolation failed: {0}")]
    RootIsolation(String),

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("internal consistency violation: {0}")]
    Consistency(String),

    #[error("coefficient table too small: need order {needed}, table built to {available}")]
    TableTooSmall { needed: u32, available: u32 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
