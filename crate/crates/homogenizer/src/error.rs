use std::io;
use std::path::PathBuf;

use homogenizer_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: question `{question_id}`: {source}")]
    Entity {
        path: PathBuf,
        question_id: String,
        #[source]
        source: CoreError,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Usage(String),
    #[error("{0} self-check(s) failed")]
    SelfCheck(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// 1 for invalid input or flags, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::SelfCheck(_) => 2,
            Error::Core(CoreError::Divergence { .. }) => 2,
            _ => 1,
        }
    }
}
