use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("radius {radius} exceeds window radius {window}")]
    RadiusExceedsWindow { radius: f64, window: f64 },

    #[error("arc infeasible: |kappa| * chord / 2 = {0} > 1")]
    InfeasibleArc(f64),

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("newton iteration did not converge (residual {residual:e} after {iterations} iterations)")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("constraint projection failed: {0}")]
    Projection(String),

    #[error("topology move rejected: {0}")]
    MoveRejected(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("window too small: slab needs width {required_width} but only {available} is available")]
    WindowTooSmall { required_width: f64, available: f64 },

    #[error("interface between labels {0} and {1} is not flat")]
    NotFlat(usize, usize),

    #[error("infeasible targets: {0}")]
    InfeasibleTargets(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
