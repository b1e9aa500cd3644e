use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("{what}: non-finite sample at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(
        "step rejected: h * max|grad u| = {product:.3e} exceeds {limit}; retry with h <= {max_h:.3e}"
    )]
    StepRejected { product: f64, limit: f64, max_h: f64 },

    #[error("fixed-point inversion did not converge in {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("mesh degenerate: {0}")]
    MeshDegenerate(String),

    #[error("shock detected at t = {t:.6} (min dX/dy = {min_jacobian:.3e})")]
    ShockDetected { t: f64, min_jacobian: f64 },

    #[error("CFL condition violated: h * max|u| / dx = {cfl:.3e} > {limit}")]
    CflViolation { cfl: f64, limit: f64 },

    #[error("index {index} out of range for ensemble of {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("config line {line}: {msg}")]
    ConfigLine { line: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
