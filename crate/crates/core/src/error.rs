use thiserror::Error;

/// Errors raised by model construction, simulation and estimation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("moment of order {order} does not exist (requires order < {bound})")]
    MomentDoesNotExist { order: f64, bound: f64 },

    #[error("sample too short: {len} values, need more than {needed}")]
    SampleTooShort { len: usize, needed: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("half-width cap exceeded: no power of two up to {cap} meets the tolerance")]
    HalfWidthCapExceeded { cap: usize },

    #[error("innovation stream too short: have {have}, need {need}")]
    StreamTooShort { have: usize, need: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dyadic level {levels} needs at least 2^{levels} terms, series has {len}")]
    LevelsExceedLength { levels: u32, len: usize },

    #[error("horizon cap exceeded: {levels} dyadic levels requested, at most {cap} allowed")]
    HorizonCapExceeded { levels: u32, cap: u32 },

    #[error("ill-posed target: condition number {condition:.3e} exceeds {limit:.0e}")]
    IllPosedTarget { condition: f64, limit: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
