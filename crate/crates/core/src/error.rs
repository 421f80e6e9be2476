use alloc::string::String;

/// Errors raised by the pure core. Every variant is an input or lookup
/// failure; nothing here touches IO.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("onset time {0} s is negative or not finite")]
    InvalidOnset(f64),
    #[error("invalid time base: {0}")]
    InvalidTimeBase(&'static str),
    #[error("velocity {value} at slot {index} is outside 0..=127")]
    VelocityOutOfRange { index: usize, value: i32 },
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("threshold {0} is outside [0, 1]")]
    ThresholdOutOfRange(f64),
    #[error("unknown model id `{0}`")]
    UnknownModel(String),
    #[error("{what} = {value} is out of range")]
    OutOfRange { what: &'static str, value: i64 },
    #[error("{0} must be a positive finite number")]
    NotPositive(&'static str),
    #[error("at least one latent point is required")]
    EmptyAtlas,
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = core::result::Result<T, Error>;
