use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid gamma sequence: {0}")]
    InvalidGamma(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate denominator in closed-form alpha (N={horizon}, m={control_horizon})")]
    DegenerateDenominator {
        horizon: usize,
        control_horizon: usize,
    },

    #[error("linear program {0}")]
    Lp(String),

    #[error("no stabilizing horizon up to N={n_max} (alpha there = {alpha_at_max})")]
    HorizonNotFound { n_max: usize, alpha_at_max: f64 },

    #[error("state diverged: {0}")]
    Divergence(String),

    #[error("trace too short: {0}")]
    TraceTooShort(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
