use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument is outside its domain.
    Parameter(String),
    /// A query reached past the construction horizon.
    HorizonExceeded { requested: f64, horizon: f64 },
    /// Inputs were built for different constructions or parameters.
    Configuration(String),
    /// The requested combination of features is not implemented.
    Unsupported(String),
    /// A finite window was too narrow to certify an exact answer.
    WidthCertificate(String),
    /// Not enough data for the requested estimator or test.
    InsufficientData { needed: usize, got: usize },
    /// The data make the statistic undefined.
    Degenerate(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parameter(m) => write!(f, "parameter error: {m}"),
            Error::HorizonExceeded { requested, horizon } => {
                write!(f, "time {requested} exceeds construction horizon {horizon}")
            }
            Error::Configuration(m) => write!(f, "configuration error: {m}"),
            Error::Unsupported(m) => write!(f, "unsupported: {m}"),
            Error::WidthCertificate(m) => write!(f, "window too narrow: {m}"),
            Error::InsufficientData { needed, got } => {
                write!(f, "insufficient data: need {needed}, got {got}")
            }
            Error::Degenerate(m) => write!(f, "degenerate input: {m}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
