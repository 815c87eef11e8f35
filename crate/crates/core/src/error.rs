use thiserror::Error;

/// Errors raised by the core algorithms.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("transition row for (state {state}, action {action}) sums to {sum}")]
    RowNotStochastic { state: usize, action: usize, sum: f64 },

    #[error("reward {reward} at (state {state}, action {action}) is outside [0, 1]")]
    RewardOutOfRange { state: usize, action: usize, reward: f64 },

    #[error("discount factor {0} must lie in [0, 1)")]
    InvalidDiscount(f64),

    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("non-finite or negative bonus {value} at pair {pair}")]
    InvalidBonus { pair: usize, value: f64 },

    #[error("invalid aggregation: {0}")]
    InvalidAggregation(String),

    #[error("density model has no observations yet")]
    EmptyDensity,

    #[error("density model is not learning-positive: rho' = {rho_prime} < rho = {rho}")]
    NotLearningPositive { rho: f64, rho_prime: f64 },

    #[error("closed form diverges: {0}")]
    Divergence(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("inconsistent agent configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
