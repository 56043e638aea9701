//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised while building models, evaluating kernels or running checks.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or model parameter is outside its admissible range.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// An argument lies outside the domain of the evaluated function.
    #[error("argument out of domain in {function}: {detail}")]
    Domain { function: &'static str, detail: String },

    /// An adaptive quadrature did not reach its tolerance.
    #[error("quadrature did not converge in {context}: estimated error {error:e}")]
    Quadrature { context: String, error: f64 },

    /// A field contains NaN or an infinity.
    #[error("non-finite value {value} at {location}")]
    NonFinite { value: f64, location: String },

    /// The Picard series for the Levi correction failed to decay.
    #[error("Picard series did not decay within {terms} terms (last norm ratio {ratio:.3e})")]
    Divergence { terms: usize, ratio: f64 },

    /// A density is more negative than the admissible ripple.
    #[error("negative density {value:e} at {location}")]
    Negativity { value: f64, location: String },

    /// A constructed kernel lost or gained too much mass.
    #[error("mass deviation {deviation:e} at {location}")]
    Mass { deviation: f64, location: String },

    /// A suite selector was not recognised.
    #[error("unknown suite `{name}`; valid selectors: scale, model, symkernel, parametrix, simulate, all")]
    UnknownSuite { name: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field: field.into(), reason: reason.into() }
    }

    pub(crate) fn domain(function: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain { function, detail: detail.into() }
    }
}
