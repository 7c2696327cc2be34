use std::fmt;

use soliton_qubit::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Validation,
    Numerical,
    Io,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Validation => "validation",
            Kind::Numerical => "numerical",
            Kind::Io => "io",
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Kind::Io => 1,
            Kind::Validation => 2,
            Kind::Numerical => 3,
        }
    }
}

/// A failure reported as one `error[<kind>]: <message>` line on stderr.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("error[{}]: {message}", kind.name())]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl fmt::Display) -> Self {
        Self::new(Kind::Validation, message)
    }

    pub fn io(message: impl fmt::Display) -> Self {
        Self::new(Kind::Io, message)
    }

    fn new(kind: Kind, message: impl fmt::Display) -> Self {
        // one line, whatever the source message looks like
        let message = message.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
        CliError { kind, message }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::Io { .. } => Kind::Io,
            ref e if e.is_numerical() => Kind::Numerical,
            _ => Kind::Validation,
        };
        Self::new(kind, e)
    }
}
