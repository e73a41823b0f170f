use std::fmt;

use collapse_lab::Error;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Io = 2,
    Precondition = 3,
    Config = 4,
    Numeric = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            exit: Exit::Config,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            exit: Exit::Io,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn exit_for(err: &Error) -> Exit {
    match err {
        Error::Io(_) | Error::Format(_) | Error::Value(_) => Exit::Io,
        Error::EmptyDataset(_)
        | Error::Dimension(_)
        | Error::InsufficientPoints { .. }
        | Error::DegenerateInput(_) => Exit::Precondition,
        Error::Config(_) => Exit::Config,
        Error::Domain(_) | Error::Numerical(_) | Error::Internal(_) => Exit::Numeric,
        Error::Iteration { source, .. } => match exit_for(source) {
            e @ (Exit::Config | Exit::Io) => e,
            _ => Exit::Numeric,
        },
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError {
            exit: exit_for(&err),
            message: err.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
