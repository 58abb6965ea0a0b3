use std::fmt;
use std::process::ExitCode;

/// Failure of a CLI run, classified by exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad input, config or path; exit code 2.
    Validation(String),
    /// The numerics failed on valid input; exit code 3.
    Numeric(String),
    /// A checked inequality failed; exit code 4.
    Violation(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Violation(_) => 4,
        })
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Violation(m) => write!(f, "bound violated: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<jumpcurv::Error> for CliError {
    fn from(e: jumpcurv::Error) -> Self {
        match e {
            jumpcurv::Error::Numeric(_) => CliError::Numeric(e.to_string()),
            jumpcurv::Error::Violation(_) => CliError::Violation(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
