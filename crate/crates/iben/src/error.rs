use std::path::PathBuf;

/// Errors from file handling and commands. [`Error::exit_code`] gives the
/// process exit status: 1 for validation and check failures, 2 for I/O and
/// format problems.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}:{line}: {message}")]
    Format {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("{source_name}: {message}")]
    File { source_name: String, message: String },
    #[error("bad magic bytes in {0}")]
    BadMagic(String),
    #[error("{0}: truncated payload")]
    Truncated(String),
    #[error("{0}: record dimensions overflow")]
    DimensionOverflow(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Check(String),
    #[error(transparent)]
    Core(#[from] iben_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Check(_) | Error::Core(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn file(source_name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::File {
            source_name: source_name.into(),
            message: message.into(),
        }
    }
}
