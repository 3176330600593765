use std::fmt;
use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by tensor construction, layer validation, kernels and the
/// benchmark harness.
#[derive(Debug)]
pub enum Error {
    /// Shape or data-length mismatch between tensors/weights and a layer.
    Dimension(String),
    /// A layer configuration that the kernels cannot execute
    /// (non-divisible groups, even kernel, negative output shift, ...).
    Configuration(String),
    /// Out-of-range element access.
    Bounds(String),
    /// Invalid numeric input (empty tensor, non-finite values).
    Domain(String),
    /// Requested execution path does not exist for the primitive.
    UnsupportedPath(String),
    /// Not enough data points for an analysis (regression needs >= 3).
    InsufficientData(String),
    /// Plan-file or CSV content that could not be parsed.
    Parse(String),
    /// I/O failure, with the offending path.
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::Configuration(msg) => write!(f, "configuration error: {msg}"),
            Error::Bounds(msg) => write!(f, "bounds error: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::UnsupportedPath(msg) => write!(f, "unsupported path: {msg}"),
            Error::InsufficientData(msg) => write!(f, "insufficient data: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Io { path, source } => write!(f, "i/o error on {}: {source}", path.display()),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
