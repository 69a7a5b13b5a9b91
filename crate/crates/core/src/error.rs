use thiserror::Error;

/// Errors raised by the estimation, oracle and bound routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("derivative order {order} exceeds the supported order {supported} of the {kernel} kernel")]
    UnsupportedDerivative {
        kernel: &'static str,
        order: u32,
        supported: u32,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge: estimated error {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("integral diverges: tail contribution still {remainder:.3e} at t = {upper:.3e}")]
    Divergent { upper: f64, remainder: f64 },

    #[error("accuracy target {target:.1e} unreachable, achieved {achieved:.3e}")]
    AccuracyUnreachable { target: f64, achieved: f64 },

    #[error("oracle `{what}` is not available for {distribution}")]
    OracleUnavailable {
        what: &'static str,
        distribution: String,
    },

    #[error("ball probability vanishes at radius {radius:e}; log-log fit undefined")]
    ZeroProbability { radius: f64 },

    #[error("{0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
