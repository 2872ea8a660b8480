use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("`{0}` is not a function")]
    NotAFunction(String),

    #[error("domain error in `{function}`: argument {argument}")]
    DomainError { function: &'static str, argument: f64 },

    #[error("evaluation produced a non-finite value")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("metric is singular or not positive definite at {point:?}")]
    SingularMetric { point: Vec<f64> },

    #[error("tensor A is singular at {point:?}")]
    SingularA { point: Vec<f64> },

    #[error("epsilon = {0} is excluded: epsilon must differ from 1 and m+1")]
    EpsilonExcluded(f64),

    #[error("scene validation failed: {0}")]
    Validation(String),

    #[error(
        "t = {t} is too close to the spectrum of A at {point:?} (condition estimate {cond:.3e}); \
         use the regularized evaluation"
    )]
    NearSpectrum { t: f64, point: Vec<f64>, cond: f64 },

    #[error(
        "an eigenvalue cluster at {value} other than the c-cluster lies within {gap:.3e} of c = {c}"
    )]
    ClusterTooClose { c: f64, value: f64, gap: f64 },

    #[error("c-cluster multiplicity {found} exceeds the declared multiplicity k = {k}")]
    ClusterTooLarge { k: usize, found: usize },

    #[error("eigenvalue branch {branch} is not simple at this point (gap {gap:.3e})")]
    ClusteredEigenvalue { branch: usize, gap: f64 },

    #[error("no sample point with simple spectrum was found")]
    NoSimpleSpectrum,

    #[error("exponent 1/(1-eps) - 1/k = {0:.6e} is nonzero; regularized evaluation requires k = 1 - eps")]
    ExponentMismatch(f64),

    #[error("A has a non-positive eigenvalue ({0}); reconstruction requires a positive solution")]
    NonPositiveA(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidArgument(format!("json: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
