use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Io,
    Format,
    Backend,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Io => 2,
            ErrorKind::Format => 3,
            ErrorKind::Backend => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("truncated frame {frame}: expected {expected} bytes, got {received}")]
    Truncated {
        frame: u64,
        expected: usize,
        received: usize,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("patch size {patch} yields an empty grid for a {width}x{height} frame")]
    EmptyGrid {
        patch: usize,
        width: usize,
        height: usize,
    },
    #[error("index out of bounds: {0}")]
    OutOfBounds(String),
    #[error("video has no frame pairs")]
    EmptyVideo,
    #[error("backend error: {0}")]
    Backend(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } | Error::Stream(_) => ErrorKind::Io,
            Error::Backend(_) => ErrorKind::Backend,
            Error::Config(_) | Error::Contract(_) => ErrorKind::Usage,
            _ => ErrorKind::Format,
        }
    }
}
