use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("validation: {0}")]
    Validation(String),

    #[error("config: {0}")]
    Config(String),

    #[error("training: non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },

    #[error("training: {0}")]
    Training(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Validation(_) => "validation",
            Error::Config(_) => "config",
            Error::NonFiniteGradient { .. } | Error::Training(_) => "training",
            Error::Usage(_) => "usage",
            Error::Parse { .. } => "parse",
            Error::Version { .. } => "version",
            Error::Io { .. } => "io",
            Error::Json(_) => "schema",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
