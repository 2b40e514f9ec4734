use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    InvalidInput(String),
    /// Corpus text could not be parsed. Line and column are 1-based.
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    /// A note could not be spelled within double-flat .. double-sharp.
    OutOfSpelling(String),
    /// An operation was called in the wrong order (e.g. backward before forward).
    State(String),
    /// The finite-difference harness saw two different losses for the same parameters.
    CheckInvalid(String),
    /// A gradient contained NaN or infinity; the named parameter was not updated.
    NonFiniteGradient { parameter: String },
    /// Training produced a non-finite loss at the given optimizer step.
    Diverged { step: usize },
    /// Brute-force enumeration would exceed the configured size guard.
    TooLarge { size: u128, limit: u128 },
    /// A token is not part of the model vocabulary.
    UnknownToken(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Parse {
                line,
                column,
                message,
            } => write!(f, "parse error at line {line}, column {column}: {message}"),
            Error::OutOfSpelling(msg) => write!(f, "cannot spell transposed note: {msg}"),
            Error::State(msg) => write!(f, "invalid state: {msg}"),
            Error::CheckInvalid(msg) => write!(f, "gradient check invalid: {msg}"),
            Error::NonFiniteGradient { parameter } => {
                write!(f, "non-finite gradient in parameter `{parameter}`")
            }
            Error::Diverged { step } => write!(f, "training diverged at step {step}"),
            Error::TooLarge { size, limit } => {
                write!(f, "enumeration of {size} sequences exceeds the limit of {limit}")
            }
            Error::UnknownToken(tok) => write!(f, "unknown token `{tok}`"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
