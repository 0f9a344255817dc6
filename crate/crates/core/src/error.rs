use thiserror::Error;

/// Errors raised across the surrogate-training pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("training covariance is not positive definite for component {component} (design of {points} points)")]
    Factorization { component: usize, points: usize },

    #[error("point {0:?} lies outside the parameter domain")]
    OutsideDomain(Vec<f64>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("log-density returned NaN at {0:?}")]
    NanDensity(Vec<f64>),

    #[error("tolerance refinement must not increase the tolerance ({old} -> {new})")]
    ToleranceIncrease { old: f64, new: f64 },

    #[error("unknown forward model '{0}'")]
    UnknownModel(String),

    #[error("empty sample chain")]
    EmptyChain,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
