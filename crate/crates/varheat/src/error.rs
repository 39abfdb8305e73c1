use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] varheat_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed file: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("replicate {replicate} (seed {seed}) failed: {source}")]
    Replicate {
        replicate: u64,
        seed: u64,
        #[source]
        source: varheat_core::Error,
    },
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        AppError::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }

    /// 2 for bad arguments or unreadable input, 3 for numerical failures,
    /// 1 for other IO errors.
    pub fn exit_code(&self) -> i32 {
        use varheat_core::Error as E;
        match self {
            AppError::Invalid(_) | AppError::Format { .. } => 2,
            AppError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
            AppError::Io { .. } => 1,
            AppError::Core(e) | AppError::Replicate { source: e, .. } => match e {
                E::InvalidArgument(_) | E::DegenerateInput(_) => 2,
                E::NumericalFailure { .. } | E::EstimatorUndefined(_) => 3,
            },
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
