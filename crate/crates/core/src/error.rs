use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration invariant does not hold. `class` is 1-based.
    #[error("class {class}: {message}")]
    InvalidClass { class: usize, message: String },

    #[error("invalid pool: {0}")]
    InvalidPool(String),

    #[error(
        "state space has {} states, above the enumeration cap of {cap}; use the recursive engine",
        if *size == u128::MAX { "more than 10^38".to_string() } else { size.to_string() }
    )]
    StateSpaceTooLarge { size: u128, cap: u128 },

    #[error("degenerate pool variance")]
    DegenerateVariance,

    #[error("approximation valid only for N > |M|mu (alpha = {alpha})")]
    ApproximationOutOfRange { alpha: f64 },

    #[error("{0}")]
    Precondition(String),

    #[error("no samples")]
    NoSamples,

    #[error("mismatched configuration: {0}")]
    Mismatch(String),
}
