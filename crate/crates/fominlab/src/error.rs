use thiserror::Error;

/// Errors produced by the simulation and estimation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model '{model}' produced non-finite values at {context}")]
    ModelEvaluation { model: String, context: String },

    #[error("{count} of {total} paths diverged (first at step {first_step}); estimators refuse trimmed batches")]
    DivergedPaths {
        count: usize,
        total: usize,
        first_step: usize,
    },

    #[error("time {t} does not sit on the dt = {dt} grid (relative error > 1e-12)")]
    OffGrid { t: f64, dt: f64 },

    #[error("degenerate sample spread: coordinate {coord} has zero variance")]
    DegenerateSpread { coord: usize },

    #[error("test function '{0}' does not supply a hessian")]
    MissingHessian(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv parse error at line {line}: {msg}")]
    CsvParse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
