//! Error types shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("sample too small: n = {n}, need at least {min}")]
    SampleTooSmall { n: usize, min: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("degenerate sample: {context}")]
    DegenerateSample { context: &'static str },

    #[error("correlation magnitude is 1, test statistic undefined")]
    DegenerateCorrelation,

    #[error("invalid degrees of freedom: {df}")]
    InvalidDf { df: f64 },

    #[error("singular design matrix (regressor is constant)")]
    SingularDesign,

    #[error("leverage {leverage} at index {index} is at or above 1")]
    LeverageOne { index: usize, leverage: f64 },

    #[error("invalid nesting: small model has {p_small} parameters, big model {p_big}")]
    InvalidNesting { p_small: usize, p_big: usize },

    #[error("bigger model fits worse: rss {rss_big} > {rss_small}; check the fitting step")]
    NegativeImprovement { rss_small: f64, rss_big: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("feature selection would leave no features")]
    EmptyFeatureSet,

    #[error("bootstrap round {round} produced no out-of-bag sample after {retries} retries")]
    EmptyOutOfBag { round: usize, retries: usize },

    #[error("equicorrelation {rho} is outside the positive-definite range for {d} dimensions")]
    InvalidCorrelation { rho: f64, d: usize },

    #[error("generator network output is constant; cannot scale noise")]
    DegenerateGenerator,

    #[error("target must be positive for a log transform (row {row})")]
    NonPositiveTarget { row: usize },

    #[error("unknown column: {name}")]
    UnknownColumn { name: String },

    #[error("polynomial basis is rank deficient or has more columns than rows")]
    SingularBasis,

    #[error("model fit failed in {unit} {index}: {source}")]
    FitFailure {
        unit: &'static str,
        index: usize,
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        if err.is_io_error() {
            match err.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                other => Error::Parse(format!("{other:?}")),
            }
        } else {
            Error::Parse(err.to_string())
        }
    }
}
