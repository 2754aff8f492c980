use thiserror::Error;

/// Errors raised by mesh construction, assembly, solving and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("unsupported polynomial degree {0}; expected 1 or 2")]
    UnsupportedDegree(usize),

    #[error("cell {cell} has non-positive signed area {area:e}")]
    DegenerateCell { cell: usize, area: f64 },

    #[error("no Dirichlet value supplied for constrained facet dof {0}")]
    MissingBoundaryValue(usize),

    #[error("body force is not finite at ({x}, {y})")]
    NonFiniteForce { x: f64, y: f64 },

    #[error("boundary data has net normal flux {0:e}; the velocity cannot be divergence free")]
    IncompatibleFlux(f64),

    #[error("factorization failed: {0}")]
    SingularSystem(String),

    #[error("local interior block on cell {cell} is singular")]
    SingularLocalBlock { cell: usize },

    #[error("solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("dense problem has {dofs} dofs, limit is {limit}")]
    TooLarge { dofs: usize, limit: usize },

    #[error("malformed mesh dump at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
