use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("axis {0} out of range (expected 0, 1 or 2)")]
    Axis(usize),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field is not unit length at cell {cell} (|m| = {norm})")]
    NotUnit { cell: usize, norm: f64 },

    #[error("non-finite value produced at cell {0}")]
    NonFinite(usize),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("stray field enabled but no demag tensor supplied")]
    MissingTensor,

    #[error("demag tensor was built for a different grid")]
    TensorMismatch,

    #[error("zero-length intermediate state at cell {0}; time step too large")]
    Degenerate(usize),

    #[error("fixed-point iteration did not converge in {iterations} iterations (last update {last_update:e})")]
    NoConvergence { iterations: usize, last_update: f64 },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trajectory needs at least {needed} snapshots, found {found}")]
    TooFewSnapshots { needed: usize, found: usize },

    #[error("empty test-function set")]
    NoTestFields,

    #[error("series contains a negative entry at index {0}")]
    NegativeSeries(usize),

    #[error("difference field does not start at zero (|w(0)| = {0:e})")]
    NonzeroStart(f64),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
