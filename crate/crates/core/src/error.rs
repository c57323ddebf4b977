use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("eigenvalue iteration did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("Loewner constant must lie in (0, 1], got {0}")]
    InvalidC(f64),

    #[error("quadrature failed on [{a}, {b}]: error estimate {estimate:e} above tolerance")]
    QuadratureFailure { a: f64, b: f64, estimate: f64 },

    #[error("invalid volatility profile: {0}")]
    InvalidProfile(String),

    #[error("invalid differencing: {0}")]
    InvalidDifferencing(String),

    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("alpha = {0} outside the supported range (1/2, 2]")]
    UnsupportedAlpha(f64),

    #[error("only {m} bumps; at least 8 are needed for the Varshamov-Gilbert guarantee")]
    TooFewBumps { m: usize },

    #[error("could not certify a code of length {m}: {reason}")]
    ConstructionFailure { m: usize, reason: String },

    #[error("profile outside the Hoelder class: {0}")]
    ProfileOutOfClass(String),

    #[error("hypothesis budget exhausted: {0}")]
    BudgetExceeded(String),

    #[error("likelihood maximisation failed: {reason}; profile {profile:?}")]
    OptimizationFailure {
        reason: String,
        profile: Vec<(f64, f64)>,
    },

    #[error("block of {len} observations is too small (need at least 16)")]
    BlockTooSmall { len: usize },

    #[error("unsupported request: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
