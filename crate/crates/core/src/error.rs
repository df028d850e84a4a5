use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("non-finite state {value} for particle {particle} at t = {time}")]
    NonFiniteState {
        time: f64,
        particle: usize,
        value: f64,
    },

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("inverse-moment estimate dominated by the floor ({floored_fraction} of samples floored)")]
    AllStatesFloored { floored_fraction: f64 },

    #[error("variance collapsed to {variance} at t = {time}")]
    VarianceCollapse { time: f64, variance: f64 },

    #[error("sigma^2 = {sigma_sq} left [1/K, K] with K = {k_bound} at t = {time}")]
    SigmaBoundViolated {
        time: f64,
        sigma_sq: f64,
        k_bound: f64,
    },

    #[error("degenerate Gaussian (variance = {0})")]
    DegenerateGaussian(f64),

    #[error("empty measure")]
    EmptyMeasure,

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("instance too large for exhaustive transport ({atoms} atoms, cap {cap})")]
    TooLarge { atoms: usize, cap: usize },

    #[error("non-positive value {value} at index {index}")]
    NonPositiveValue { index: usize, value: f64 },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("y = {y} outside the admissible band [{lo}, {hi}]")]
    OutOfBand { y: f64, lo: f64, hi: f64 },

    #[error("not ergodic: contraction rate {rate} <= 0")]
    NotErgodic { rate: f64 },

    #[error("stationary state iteration did not converge: {0}")]
    NoStationaryState(String),
}

pub type Result<T> = std::result::Result<T, Error>;
