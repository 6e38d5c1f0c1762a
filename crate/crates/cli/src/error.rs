use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{0}")]
    NotConverged(String),
    #[error("shooting failed: {0}")]
    Bracket(String),
    #[error("{0}")]
    ChecksFailed(String),
    #[error("i/o error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Solver(hardy_lt::Error),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 64,
            CliError::MissingInput(_) => 66,
            CliError::NotConverged(_) => 2,
            CliError::Bracket(_) => 3,
            CliError::ChecksFailed(_) | CliError::Io { .. } | CliError::Solver(_) | CliError::Internal(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<hardy_lt::Error> for CliError {
    fn from(e: hardy_lt::Error) -> Self {
        use hardy_lt::Error as E;
        match e {
            E::InvalidParams(m) | E::InvalidGrid(m) => CliError::Usage(m),
            E::BracketNotFound { .. } | E::AmbiguousShooting(_) => CliError::Bracket(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
