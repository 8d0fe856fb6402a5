use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("component {index} returned a non-finite value or gradient")]
    NonFinite { index: usize },

    #[error("iterate became non-finite at iteration {iteration}")]
    Diverged { iteration: u64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("beta = {beta} lies outside the admissible range [0, {beta_max})")]
    BetaRange { beta: f64, beta_max: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("initial point lies outside the projection set (distance {distance})")]
    InfeasibleStart { distance: f64 },

    #[error("problem metadata is required for {0}")]
    MissingMetadata(&'static str),

    #[error("matrix is numerically singular")]
    Singular,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter { name, reason: reason.into() }
    }
}
