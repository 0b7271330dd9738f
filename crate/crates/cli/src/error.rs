use std::fmt;

use lipbound::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const DEFINITENESS_LOST: i32 = 4;
    pub const ALL_INFEASIBLE: i32 = 5;
    pub const VALIDATION_FAILED: i32 = 6;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(exit::USAGE, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(exit::IO, message)
    }

    /// Failure while reading or writing `path`.
    pub fn input(path: &std::path::Path, err: impl fmt::Display) -> Self {
        Self::io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (exit {})", self.message, self.code)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidConfig(_) => exit::USAGE,
            Error::Io(_)
            | Error::Parse { .. }
            | Error::InvalidNetwork(_)
            | Error::DimensionChain { .. } => exit::IO,
            Error::DefinitenessLost { .. } => exit::DEFINITENESS_LOST,
            Error::AllInfeasible { .. } => exit::ALL_INFEASIBLE,
            Error::ValidationFailed(_) => exit::VALIDATION_FAILED,
            _ => exit::FAILURE,
        };
        Self::new(code, e.to_string())
    }
}
