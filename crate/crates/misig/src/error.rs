use std::io;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed file: {0}")]
    Format(String),
    #[error("size mismatch: expected {expected} bytes, got {actual}")]
    SizeMismatch { expected: u64, actual: u64 },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] misig_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category for the CLI error line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format(_) | Error::SizeMismatch { .. } | Error::Json(_) => "format",
            Error::Core(e) if e.is_numeric() => "numeric",
            Error::Input(_) | Error::Core(_) => "input",
        }
    }

    /// 3 for numeric failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        if self.category() == "numeric" {
            3
        } else {
            2
        }
    }
}
