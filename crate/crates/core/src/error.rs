use thiserror::Error;

/// Errors surfaced by the identification lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry: {0}")]
    NonFinite(String),

    #[error("parameter out of range: {0}")]
    InvalidParameter(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Predicted state magnitude exceeds the floating-point safety cap.
    /// The caller should switch to the inverse-scaled simulation path.
    #[error("state magnitude would overflow ({0}); use scaled simulation")]
    Overflow(String),

    #[error("spectral regime mismatch: {0}")]
    Regime(String),

    /// An explosive eigenvalue with geometric multiplicity above one: OLS is
    /// statistically inconsistent for such systems, so bound requests refuse.
    #[error("irregular system: {0}")]
    Irregular(String),

    #[error("missing data: {0}")]
    Missing(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
