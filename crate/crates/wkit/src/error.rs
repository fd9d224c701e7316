use std::path::{Path, PathBuf};

/// Failures surfaced by the file layer and the command front end.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("{}: {source}", path.display())]
    Core { path: PathBuf, source: wkit_core::Error },

    #[error(transparent)]
    Compute(#[from] wkit_core::Error),

    #[error("{0}")]
    Usage(String),

    /// A numeric check failed without a non-finite value.
    #[error("{0}")]
    Numeric(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 2;
    pub const IO: i32 = 3;
    pub const NUMERIC: i32 = 4;
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_owned(), source }
    }

    pub fn json(path: &Path, source: serde_json::Error) -> Self {
        Self::Json { path: path.to_owned(), source }
    }

    pub fn core(path: &Path, source: wkit_core::Error) -> Self {
        Self::Core { path: path.to_owned(), source }
    }

    pub fn exit_code(&self) -> i32 {
        let core = match self {
            Self::Io { .. } => return exit::IO,
            Self::Numeric(_) => return exit::NUMERIC,
            Self::Json { source, .. } if source.is_io() => return exit::IO,
            Self::Json { .. } | Self::Usage(_) => return exit::VALIDATION,
            Self::Core { source, .. } | Self::Compute(source) => source,
        };
        match core.root() {
            wkit_core::Error::NonFinite { .. } => exit::NUMERIC,
            _ => exit::VALIDATION,
        }
    }
}
