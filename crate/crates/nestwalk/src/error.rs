use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] nestwalk_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Format(String),
    /// An exact identity failed; the fields reproduce the failing case.
    #[error(
        "exact identity `{check}` failed: seed {seed}, replication {rep}, level {level}, index {index}"
    )]
    Exact {
        check: &'static str,
        seed: u64,
        rep: usize,
        level: u32,
        index: usize,
    },
}

impl HarnessError {
    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// 1 acceptance failure, 2 usage, 3 resource or I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) | HarnessError::Validation(_) => 2,
            HarnessError::Core(nestwalk_core::Error::Usage(_))
            | HarnessError::Core(nestwalk_core::Error::Invalid(_)) => 2,
            HarnessError::Core(_) | HarnessError::Io { .. } | HarnessError::Format(_) => 3,
            HarnessError::Exact { .. } => 1,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
