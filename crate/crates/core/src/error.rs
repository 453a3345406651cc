use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, mapped onto process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("no valid rows in input")]
    NoValidRows,

    #[error("conflicting rows share timestamps: {}", .0.join(", "))]
    ConflictingDuplicates(Vec<String>),

    #[error("series has {0} gap(s) and the gap policy is `error`")]
    GapsPresent(usize),

    #[error("timestamp {0} is not aligned to the series interval")]
    OffGrid(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("series too short: need at least {needed} bars, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("split produced an empty {0} block")]
    EmptySplit(&'static str),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite activation at epoch {epoch}, step {step}")]
    NonFinite { epoch: usize, step: usize },

    #[error("training diverged at epoch {epoch}")]
    Diverged {
        epoch: usize,
        history: Vec<crate::models::lstm::EpochLoss>,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("output directory {} is locked by another run", .0.display())]
    Locked(PathBuf),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) | Error::Toml(_) | Error::Locked(_) => ErrorKind::Usage,
            Error::Singular(_) | Error::NonFinite { .. } | Error::Diverged { .. } => {
                ErrorKind::Numerical
            }
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }
}
