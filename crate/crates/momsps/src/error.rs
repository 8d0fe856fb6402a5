use std::path::PathBuf;

use crate::config::ConfigError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },

    /// Malformed input file; `line` is 1-based.
    #[error("{what}: {message} at line {line}")]
    Parse { what: &'static str, line: usize, message: String },

    #[error("{} configuration error(s):\n{}", .0.len(), ConfigError::join(.0))]
    Config(Vec<ConfigError>),

    #[error(transparent)]
    Core(#[from] momsps_core::Error),

    #[error("{0} run(s) diverged")]
    Diverged(usize),

    #[error("{0} bound check(s) violated")]
    BoundViolated(usize),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(what: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { what, line, message: message.into() }
    }

    /// Process exit code: 1 I/O or parse, 2 configuration, 3 divergence,
    /// 4 bound violation.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io { .. } | Error::Csv { .. } | Error::Parse { .. } => 1,
            Error::Config(_) | Error::Core(_) => 2,
            Error::Diverged(_) => 3,
            Error::BoundViolated(_) => 4,
        }
    }
}
