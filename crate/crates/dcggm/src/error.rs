use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", source.name())]
    Solver {
        #[from]
        source: dcggm_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("every cell failed ({failures} failures)")]
    AllFailed { failures: usize },
}

impl AppError {
    /// 1 for bad input or flags, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Solver { source } if !source.is_validation() => 2,
            AppError::AllFailed { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> AppError {
        let path = path.into();
        move |source| AppError::Io { path, source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> AppError {
        AppError::Format { path: path.into(), msg: msg.into() }
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
