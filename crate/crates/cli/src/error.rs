use std::fmt;

use twisted_absorption::Error as CoreError;

/// Exit status for invalid configuration, input files or physics invariants.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for numerical failures.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    /// The configuration does not match the schema.
    Schema {
        key: String,
        line: usize,
        reason: String,
    },
    /// A physical invariant of a configured object fails.
    Physics {
        invariant: String,
        detail: String,
    },
    Io(String),
    Core(CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        }
    }

    pub fn schema(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Schema {
            key: key.into(),
            line: 0,
            reason: reason.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema { key, line, reason } if *line > 0 => {
                write!(f, "SchemaError at `{key}` (line {line}): {reason}")
            }
            CliError::Schema { key, reason, .. } => write!(f, "SchemaError at `{key}`: {reason}"),
            CliError::Physics { invariant, detail } => write!(f, "PhysicsError [{invariant}]: {detail}"),
            CliError::Io(msg) => write!(f, "IoError: {msg}"),
            CliError::Core(e) if e.is_numerical() => write!(f, "NumericalError: {e}"),
            CliError::Core(e) => write!(f, "ValidationError: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Physics { invariant, detail } => CliError::Physics {
                invariant: invariant.to_string(),
                detail,
            },
            other => CliError::Core(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
