use thiserror::Error;

/// Errors raised by the numerical kernels. Kept `Clone` so spectral caches can
/// memoize failures.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericError {
    #[error("matrix entries must be finite")]
    NonFiniteEntries,
    #[error("dimension mismatch: {0}x{0} vs {1}x{1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix is not Hermitian: asymmetry {asymmetry:.3e} exceeds {limit:.3e}")]
    NotHermitian { asymmetry: f64, limit: f64 },
    #[error("eigensolver failed to converge (LAPACK info = {info})")]
    EigenFailed { info: i32 },
    #[error("linear solve failed (LAPACK info = {info})")]
    SolveFailed { info: i32 },
    #[error("spectral floor violated: smallest eigenvalue {min_eigenvalue:.12e} < {floor}")]
    SpectralFloor { min_eigenvalue: f64, floor: f64 },
    #[error("matrix is not positive definite: smallest eigenvalue {min_eigenvalue:.12e}")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error(
        "quadrature did not converge within {nodes} nodes (last residual {residual:.3e}, target {target:.3e})"
    )]
    QuadratureConvergence {
        nodes: usize,
        residual: f64,
        target: f64,
    },
    #[error(
        "integration step budget of {budget} exhausted at t = {reached} of [{from}, {to}] (accumulated error {accumulated:.3e})"
    )]
    StepBudget {
        budget: u64,
        reached: f64,
        from: f64,
        to: f64,
        accumulated: f64,
    },
    #[error("unitarity drift {drift:.3e} exceeds 1e-8; integrator defect")]
    UnitarityDrift { drift: f64 },
    #[error("propagator picture/endpoint mismatch: {0}")]
    PictureMismatch(String),
}

/// Top-level toolkit error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("configuration error in {path}: {message}")]
    Config { path: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the failure is a numerical budget exhaustion (step budget or
    /// quadrature node budget), which maps to its own process exit code.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::Numeric(NumericError::StepBudget { .. })
                | Error::Numeric(NumericError::QuadratureConvergence { .. })
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
