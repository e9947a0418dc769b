use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}x{0} vs {1}x{1}")]
    DimensionMismatch(usize, usize),

    #[error("expected {expected} entries for a square matrix, got {got}")]
    EntryCount { expected: usize, got: usize },

    #[error("matrix dimension must be positive")]
    ZeroDimension,

    #[error("non-finite matrix entry at ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("matrix is not Hermitian (max |M - M^dag| = {0:e})")]
    NotHermitian(f64),

    #[error("trace is not 1 (got {re} + {im}i)")]
    InvalidTrace { re: f64, im: f64 },

    #[error("matrix has negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),

    #[error("Bloch vector norm {0} exceeds 1")]
    BlochNorm(f64),

    #[error("control vector has {got} entries, channel arity is {expected}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("non-finite control parameter at index {0}")]
    NonFiniteControl(usize),

    #[error("Kraus set is empty")]
    EmptyKrausSet,

    #[error("negative probability p[{index}] = {value} in strict mode")]
    NegativeProbability { index: usize, value: f64 },

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid fluctuation model: {0}")]
    InvalidModel(String),

    #[error("uniform noise requires a diagonal covariance")]
    NonDiagonalUniform,

    #[error("averaging method {method} is incompatible: {reason}")]
    IncompatibleMethod {
        method: &'static str,
        reason: String,
    },

    #[error("sample count must be positive")]
    ZeroSamples,

    #[error("covariance factorization failed: not positive semidefinite (pivot {0:e})")]
    NotPsd(f64),

    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),

    #[error("parameter index {index} out of range for arity {arity}")]
    ParameterIndex { index: usize, arity: usize },
}
