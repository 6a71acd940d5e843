use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exploration mode {mode} is not defined for the {variant} variant")]
    ModeMismatch { mode: String, variant: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An enumeration would exceed its configured work budget.
    #[error("budget exceeded for {what}: needs ~{needed}, budget is {budget}")]
    Budget {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("divergent series: {0}")]
    Divergent(String),

    /// Two independent routes to the same exact quantity disagreed.
    #[error("internal cross-check failed: {0}")]
    CrossCheck(String),
}

impl Error {
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}
