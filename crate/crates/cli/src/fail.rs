use std::path::{Path, PathBuf};

use motifdiff::Error;

/// Process exit codes.
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
    Io { path: PathBuf, source: std::io::Error },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => EXIT_VALIDATION,
            Self::Io { .. } => EXIT_IO,
            Self::Core(e) => match e {
                Error::Io { .. } | Error::Checkpoint(_) => EXIT_IO,
                Error::Stall { .. }
                | Error::NumericalInstability { .. }
                | Error::NonFiniteGradient(_)
                | Error::Divergence { .. } => EXIT_RUNTIME,
                _ => EXIT_VALIDATION,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "{m}"),
            Self::Core(e) => write!(f, "{e}"),
            Self::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Core(e)
    }
}
