use std::fmt;
use std::process::ExitCode;

use occupation_core::Error;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed configuration, invalid inputs.
    Usage(String),
    /// A solver failed on valid inputs.
    Compute(Error),
    /// Writing the output failed.
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Compute(_) | CliError::Output(_) => ExitCode::from(1),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::OutOfDomain { .. } => CliError::Usage(e.to_string()),
            other => CliError::Compute(other),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Compute(e) => write!(f, "computation failed: {e}"),
            CliError::Output(msg) => write!(f, "output error: {msg}"),
        }
    }
}
