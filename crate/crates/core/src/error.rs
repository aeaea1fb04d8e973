//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The caller-supplied envelope constant does not dominate the target.
    #[error("rejection envelope violated at x = {at}: log acceptance ratio exceeds 0 by {excess:.3e}")]
    EnvelopeViolation { at: f64, excess: f64 },

    /// Rejection sampling consumed its proposal budget; callers may fall back
    /// to slice sampling.
    #[error("rejection sampler acceptance too low: no acceptance within {max_tries} proposals")]
    AcceptanceTooLow { max_tries: u64 },

    #[error("slice interval collapsed to width {width:.3e} without acceptance")]
    SliceCollapse { width: f64 },

    #[error("MSE curves attain no common level; improvement factor undefined")]
    NoComparableRange,
}
