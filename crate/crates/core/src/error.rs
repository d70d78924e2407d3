use alloc::string::String;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },

    #[error("explicit step is unstable: dt * lambda_max = {product} (must be < 2)")]
    Unstable { product: f64 },

    #[error("beta_inv = 0 selects gradient flow; use simulate_gradient_flow instead")]
    NoiselessLangevin,

    #[error("simulate_gradient_flow requires beta_inv = 0, got {beta_inv}")]
    NoisyGradientFlow { beta_inv: f64 },

    #[error(
        "potential is singular (eigenvalue {eigenvalue:e}); stationary covariance is undefined"
    )]
    SingularPotential { eigenvalue: f64 },

    #[error("covariance is singular at t = {time}; use a larger initial covariance")]
    SingularCovariance { time: f64 },

    #[error("trajectory carries no gradient norms")]
    MissingGradients,

    #[error("speed limit undefined: W2 = {w2_sq} > 0 with entropy {entropy} <= 0")]
    UndefinedSpeedLimit { w2_sq: f64, entropy: f64 },

    #[error("speed limit must be positive, got {t_sl}")]
    NonPositiveSpeedLimit { t_sl: f64 },

    #[error("loss increased by {increase} (not a gradient-flow pair)")]
    LossIncrease { increase: f64 },

    #[error("all residues are zero; ratio is undefined")]
    ZeroResidues,

    #[error("integrand is not finite at s = {at}")]
    NonFinite { at: f64 },

    #[error("entropy denominator is not positive: log term {log_term}, linear term {linear_term}")]
    NonPositiveEntropy { log_term: f64, linear_term: f64 },

    #[error("empty input")]
    Empty,
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }
}
