use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] stainscope::Error),

    #[error("{path}: {message}")]
    Write { path: PathBuf, message: String },

    #[error("gradient check failed: max relative error {max:.3e} >= {tol:.0e}")]
    GradCheck { max: f64, tol: f64 },

    #[error("{count} slide(s) failed")]
    PartialFailure { count: usize },

    /// No tissue border to score; not a processing failure.
    #[error("indeterminate: {0}")]
    Indeterminate(String),
}

pub type CliResult<T> = Result<T, CliError>;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_INDETERMINATE: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(stainscope::Error::Numeric(_)) | CliError::GradCheck { .. } => EXIT_NUMERIC,
            CliError::Indeterminate(_) => EXIT_INDETERMINATE,
            _ => EXIT_DATA,
        }
    }

    pub fn write(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        CliError::Write {
            path: path.into(),
            message: e.to_string(),
        }
    }
}
