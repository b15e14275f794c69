use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A resolvent or inverse was requested on a system whose kernel the
    /// source vector overlaps.
    #[error("divergent: {0}")]
    Divergent(String),

    /// An iterative method ran out of budget. `estimate` is the best value
    /// available at that point.
    #[error("numerical error: {message} (estimate {estimate:e}, error {error:e})")]
    Numerical {
        message: String,
        estimate: f64,
        error: f64,
    },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
