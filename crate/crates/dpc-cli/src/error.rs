//! Error taxonomy mapped onto process exit codes.

use std::fmt;

/// Everything a subcommand can fail with, sorted by exit code:
/// property violations exit 1, configuration and usage problems exit 2,
/// I/O failures exit 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Bad command-line arguments (unknown sweep key, zero trials, …).
    Usage(String),
    /// A scenario that does not parse or does not validate.
    Config(String),
    /// A numerical invariant check failed.
    Property(String),
    /// Reading or writing a file failed.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Property(_) => 1,
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage: {msg}"),
            CliError::Config(msg) => write!(f, "invalid configuration: {msg}"),
            CliError::Property(msg) => write!(f, "property violation: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<dpc_core::Error> for CliError {
    fn from(e: dpc_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
