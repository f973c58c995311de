use std::fmt;

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const CONFIG: u8 = 2;
    pub const IO: u8 = 3;
    pub const INTERNAL: u8 = 4;

    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: Self::CONFIG,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: Self::IO,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            code: Self::INTERNAL,
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

impl From<gptt_audit::Error> for CliError {
    fn from(e: gptt_audit::Error) -> Self {
        use gptt_audit::Error::*;
        let code = match &e {
            Domain { .. } | Argument(_) | Precondition(_) => Self::CONFIG,
            Ingestion { .. } | Io { .. } => Self::IO,
            Internal(_) => Self::INTERNAL,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}
