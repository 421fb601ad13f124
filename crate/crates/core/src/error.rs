use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input lies outside the domain of a model.
    #[error("domain error: {0}")]
    Domain(String),
    /// Two geometry endpoints coincide or a position is invalid.
    #[error("geometry error: {0}")]
    Geometry(String),
    /// A caller-supplied argument violates a precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A configuration value is invalid.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// An optimizer produced a non-finite value.
    #[error("numerical failure in {step} at iteration {iteration}: {detail}")]
    Numerical {
        step: String,
        iteration: usize,
        detail: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
