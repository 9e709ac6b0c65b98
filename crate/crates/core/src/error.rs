use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter lies outside its admissible range.
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// The gain vanished, so conditional error rates are undefined.
    #[error("degenerate channel: gain is zero")]
    DegenerateChannel,

    #[error("series truncated at n_max = {n_max} has relative tail {tail:e} above 1e-12")]
    TruncationNotConverged { n_max: usize, tail: f64 },

    /// `-log2(1 - eta_c)` diverges at `eta_c = 1`.
    #[error("PLOB bound is infinite at unit transmittance")]
    InfiniteBound,

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("length mismatch: expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("SSTS pool underflow: requested {requested} bits, {available} available")]
    PoolUnderflow { requested: usize, available: usize },

    #[error("code rate violation: {0}")]
    RateViolation(String),

    #[error("position {position} out of range for block of {len} bits")]
    PositionOutOfRange { position: usize, len: usize },

    #[error("previous-frame estimates are required for frame {frame}")]
    MissingEstimates { frame: u64 },

    #[error("decoding failed: {0}")]
    DecodeFailure(String),
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie in [0, 1]",
        })
    }
}

pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and non-negative",
        })
    }
}
