use thiserror::Error;

/// Errors surfaced by the pricing library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Unknown stochastic volatility model name.
    #[error("unknown model `{0}` (expected hull_white, stein_stein, heston or constant)")]
    UnknownModel(String),

    /// A model parameter is out of range.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    /// Expansion order outside the supported range.
    #[error("expansion order {order} not supported: {reason}")]
    UnsupportedOrder { order: usize, reason: &'static str },

    /// An estimator was asked to reduce an empty batch.
    #[error("empty batch")]
    EmptyBatch,

    /// Too many simulated paths produced non-finite state.
    #[error("{invalid} of {total} paths were invalid (limit is 1%)")]
    TooManyInvalidPaths { invalid: usize, total: usize },

    /// A per-path functional evaluated to NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The characteristic-function quadrature failed to converge.
    #[error("quadrature did not converge: {0}")]
    QuadratureFailed(String),

    /// Percentage errors need a strictly positive reference price.
    #[error("benchmark price must be positive, got {0}")]
    NonPositiveBenchmark(f64),
}
