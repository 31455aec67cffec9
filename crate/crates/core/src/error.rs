use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("rect ({x0},{y0})-({x1},{y1}) out of bounds for {width}x{height} grid")]
    Bounds {
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
        width: usize,
        height: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("quantization error: {0}")]
    Quantization(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("library is empty")]
    EmptyLibrary,

    #[error("only {eligible} eligible entries, {required} required")]
    InsufficientEligible { eligible: usize, required: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("protocol error at `{path}`: {msg}")]
    Protocol { path: String, msg: String },

    #[error("backend failure: {0}")]
    Backend(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
