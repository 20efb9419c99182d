use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Exit status of a successful run.
pub const EXIT_OK: i32 = 0;
/// Bad flags, config file or scenario names.
pub const EXIT_USAGE: i32 = 1;
/// Unreadable input or data the model cannot accept.
pub const EXIT_DATA: i32 = 2;
/// A fit failed numerically (singular information, overflow, divergence).
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] brse_core::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) | CliError::Io { .. } => EXIT_DATA,
            CliError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            CliError::Core(brse_core::Error::Config(_)) => EXIT_USAGE,
            CliError::Core(_) => EXIT_DATA,
        }
    }
}
