use thiserror::Error;

/// Errors raised by the prediction library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A matrix that must be invertible (or positive definite) is not.
    /// `pivot` is the failing pivot row when the failure came from a factorization.
    #[error("singular system ({what}){}", pivot.map(|p| format!(" at pivot {p}")).unwrap_or_default())]
    Singular { what: String, pivot: Option<usize> },

    #[error("mean not identified: {0}")]
    MeanNotIdentified(String),

    #[error("numerical consistency check failed: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn singular(what: impl Into<String>) -> Self {
        Error::Singular {
            what: what.into(),
            pivot: None,
        }
    }

    /// True for errors caused by ill-posed or ill-conditioned linear algebra.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Singular { .. } | Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
