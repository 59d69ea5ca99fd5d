use std::path::PathBuf;

use dipole_core::Error as CoreError;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("cannot read `{path}`: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed scenario `{path}`: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("unknown override path `{path}`; valid paths are:\n  {}", valid.join("\n  "))]
    UnknownPath { path: String, valid: Vec<String> },
    #[error("override `{path}`: {message}")]
    TypeMismatch { path: String, message: String },
    #[error("bad argument: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("cannot write `{path}`: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl SimError {
    /// Process exit status: 2 for parse errors, 3 for validation errors,
    /// 4 for numerical failures, 1 for IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Read { .. } | SimError::Json { .. } | SimError::UnknownPath { .. } => 2,
            SimError::TypeMismatch { .. } | SimError::Usage(_) => 2,
            SimError::Core(e) => match e {
                CoreError::Validation(_)
                | CoreError::FrameIncompatible { .. }
                | CoreError::UnknownLabel { .. }
                | CoreError::UnknownAtom(_)
                | CoreError::Scheme(_)
                | CoreError::InvalidParameter(_) => 3,
                _ => 4,
            },
            SimError::Write { .. } | SimError::Csv(_) => 1,
        }
    }
}
