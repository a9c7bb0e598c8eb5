use thiserror::Error;

/// Errors produced by the key-rate pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A covariance matrix violates the uncertainty principle beyond rounding.
    #[error("non-physical state: {0}")]
    NonPhysicalState(String),

    /// A scalar argument is outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A constructor or operation received an invalid parameter.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Bob's source carries no modulation, so the displacement gain is undefined.
    #[error("degenerate source: sent-mode variance {0} leaves nothing to displace")]
    DegenerateSource(f64),

    /// Alice's link has zero transmittance.
    #[error("degenerate geometry: Alice-Charlie transmittance is zero")]
    DegenerateGeometry,

    /// The secret key rate is not positive anywhere in the searched region.
    #[error("no positive key rate: {0}")]
    NoPositiveRate(String),

    /// Too few Monte Carlo samples survived post-selection.
    #[error("insufficient acceptance: only {accepted} accepted samples")]
    InsufficientAcceptance { accepted: u64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
