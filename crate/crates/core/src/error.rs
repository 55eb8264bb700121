use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("depolarizing parameter {lambda} violates the Choi eigenvalue condition {condition}")]
    NotCompletelyPositive { lambda: f64, condition: &'static str },

    #[error("map is not Hermiticity-preserving (max |chi - chi^dagger| = {deviation:e})")]
    NotHermiticityPreserving { deviation: f64 },

    #[error("map is not trace-preserving (first-row deviation {deviation:e})")]
    NotTracePreserving { deviation: f64 },

    #[error("matrix is singular")]
    Singular,

    #[error("{0} is not a valid CPTP channel")]
    InvalidChannel(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("fit failed to converge (best residual norm {best_residual:e})")]
    FitNotConverged { best_residual: f64 },

    #[error("fit needs at least {required} distinct lengths, got {found}")]
    InsufficientLengths { required: usize, found: usize },

    #[error("{failed} of {total} repeats failed to fit")]
    TooManyFailedRepeats { failed: usize, total: usize },

    #[error("sequence length {m} too large for exhaustive enumeration (max {max})")]
    LengthTooLarge { m: usize, max: usize },

    #[error("spectral assumption violated: {0}")]
    SpectralAssumption(String),

    #[error("gauge construction failed: {0}")]
    GaugeConstruction(String),
}
