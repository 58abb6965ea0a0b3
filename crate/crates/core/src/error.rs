use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("site {site} is not in the site list (size {size})")]
    UnknownSite { site: usize, size: usize },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("mass mismatch: {0} vs {1}")]
    MassMismatch(f64, f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("exhaustive enumeration needs {needed} pairs, cap is {cap}")]
    CapExceeded { needed: f64, cap: f64 },
    #[error("constraint violated on validation sample: {0}")]
    Violation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
