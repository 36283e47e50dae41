use thiserror::Error;

/// Errors raised by belief updates, policy evaluation and risk computation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no support point is consistent with the revealed message")]
    EmptyConditioningSet,

    #[error("revealed covariance block is singular after regularization")]
    SingularConditioning,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("enumeration of {subsets} subsets exceeds the cap of {cap}")]
    EnumerationBudgetExceeded { subsets: u128, cap: u128 },

    #[error("bandwidth fraction {alpha} is not below the admissible bound {bound}")]
    BandwidthTooLarge { alpha: f64, bound: f64 },

    #[error("search space of {size} assignments exceeds the cap of {cap}")]
    SearchBudgetExceeded { size: u128, cap: u128 },

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("invalid loss specification: {0}")]
    InvalidLoss(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
