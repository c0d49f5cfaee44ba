use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// An inhomogeneous intensity exceeded the declared thinning envelope.
    #[error("intensity {value} at y = {at} exceeds envelope {bound}")]
    EnvelopeViolation { at: f64, value: f64, bound: f64 },

    #[error("data window [{have_start}, {have_end}) does not cover [{need_start}, {need_end})")]
    InsufficientData {
        have_start: f64,
        have_end: f64,
        need_start: f64,
        need_end: f64,
    },

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("invalid reference distribution: {0}")]
    InvalidReference(String),

    #[error("solver failed: {0}")]
    SolverFailure(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
