use alloc::string::String;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid saturation constants: {0}")]
    InvalidConstants(String),

    #[error("saturation is not of class S({order}): {reason}")]
    NotClassSp { order: usize, reason: String },

    #[error("blend on [{from}, {to}] is not monotone (derivative reaches {min_slope:.3e}); enlarge S - L")]
    NonMonotoneBlend { from: f64, to: f64, min_slope: f64 },

    #[error("derivative order {requested} exceeds smoothness order {max}")]
    OrderTooHigh { requested: usize, max: usize },

    #[error("partial Bell index out of range: k = {k}, a = {a}")]
    BellIndex { k: usize, a: usize },

    #[error("Bell coefficient overflows u64 at k = {k}")]
    CoefficientOverflow { k: usize },

    #[error("not enough arguments: need {needed}, got {got}")]
    TooFewArguments { needed: usize, got: usize },

    #[error("bound arguments must be nonnegative, got {0}")]
    NegativeBound(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("stability conditions violated: {0}")]
    StabilityConditions(String),

    #[error("non-finite state at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
