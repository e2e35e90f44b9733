use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlycomError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mode {mode} out of range for a tensor with {order} modes")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("requested rank {rank} exceeds dimension {dim}")]
    RankExceedsDimension { rank: usize, dim: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("insufficient sketches: {available} sketch columns for a rank-{required} estimate")]
    InsufficientSketches { available: usize, required: usize },

    #[error("effective channel is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),

    #[error("channel rank deficiency: {0}")]
    RankDeficient(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("principal singular values are not equal ({0:e} spread)")]
    UnequalPrincipalValues(f64),

    #[error("zero eigen-gap between principal and residual spectrum")]
    ZeroEigenGap,

    #[error("empty denoising-factor history")]
    EmptyHistory,

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("i/o error: {0}")]
    Io(String),
}

/// Experiment configuration failures, each naming the offending field(s).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("syntax error: {0}")]
    Syntax(String),

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("missing required keys: {}", .0.join(", "))]
    MissingKeys(Vec<String>),

    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
}

impl ConfigError {
    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::InvalidValue {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for FlycomError {
    fn from(e: std::io::Error) -> Self {
        FlycomError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FlycomError>;
