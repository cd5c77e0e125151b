use thiserror::Error;

/// Failure classes shared by every module of the crate.
///
/// The split mirrors how callers react: a [`Error::Domain`] means the inputs
/// were wrong, a [`Error::Numeric`] means valid inputs hit a numerical
/// breakdown (indefinite matrix, negative spectrum, non-convergence), and an
/// [`Error::Internal`] means an internal contract was violated.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
