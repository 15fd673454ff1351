use rpu_core::RpuError;
use thiserror::Error;

/// Exit status 2 for usage and configuration problems, 1 for everything else.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] RpuError),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(_) | CliError::Runtime(_) => 1,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Core(RpuError::Io { path: path.to_path_buf(), source: e })
    }
}
