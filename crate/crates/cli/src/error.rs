use std::fmt;

use fdepth::DepthError;

/// Process exit codes.
pub mod exit {
    pub const FORMAT: i32 = 2;
    pub const DEGENERATE: i32 = 3;
    pub const GRID_MISMATCH: i32 = 4;
    pub const CONFIG: i32 = 5;
    pub const IO: i32 = 1;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn format(message: impl Into<String>) -> Self {
        Self::new(exit::FORMAT, message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(exit::CONFIG, message)
    }

    pub fn io(path: &std::path::Path, err: impl fmt::Display) -> Self {
        Self::new(exit::IO, format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<DepthError> for CliError {
    fn from(e: DepthError) -> Self {
        let code = match e {
            DepthError::InvalidGrid(_)
            | DepthError::LengthMismatch { .. }
            | DepthError::NonFinite { .. }
            | DepthError::InsufficientSample { .. } => exit::FORMAT,
            DepthError::GridMismatch => exit::GRID_MISMATCH,
            DepthError::DegenerateModel { .. }
            | DepthError::ZeroEigenvalue { .. }
            | DepthError::NotPositiveDefinite
            | DepthError::IllConditioned(_)
            | DepthError::NoConvergence { .. } => exit::DEGENERATE,
            DepthError::InvalidArgument(_) | DepthError::EmptyReference | DepthError::DivergentWeights => {
                exit::CONFIG
            }
        };
        Self::new(code, e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
