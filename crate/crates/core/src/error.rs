use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {what} ({detail})")]
    NumericalFailure { what: &'static str, detail: String },

    /// `A_N <= 1`: the log-ratio estimator has no finite positive value.
    #[error("estimator undefined: {0}")]
    EstimatorUndefined(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(what: &'static str, detail: impl Into<String>) -> Self {
        Error::NumericalFailure {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateInput(msg.into())
    }

    /// True for errors caused by bad inputs rather than by the numerics.
    pub fn is_invalid_argument(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}
