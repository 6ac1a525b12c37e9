//! Error type for the IO and command-line layer.
//!
//! Core algorithm errors pass through unchanged; this layer adds the three
//! failure classes that only exist once files and flags are involved. Every
//! error maps to a stable machine-readable class string so scripts can
//! dispatch on `error[<class>]: ...` lines without parsing prose.

use std::path::PathBuf;

/// Convenience alias used across the IO and CLI layer.
pub type Result<T> = std::result::Result<T, Error>;

/// Any failure surfaced by the toolkit binary.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An algorithm error from the core library.
    #[error("{0}")]
    Core(#[from] pcreg_core::Error),
    /// The operating system refused a file operation.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A file was readable but its contents violate the format.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        /// 1-based line number; 0 when the failure is not tied to a line
        /// (for example a truncated binary payload).
        line: usize,
        message: String,
    },
    /// The command line or configuration asked for something nonsensical.
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// Wrap an OS error with the path that triggered it.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Build a parse error pinned to a line of the offending file.
    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Stable machine-readable class for exit-status dispatch and logs.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Core(e) => e.class(),
            Error::Io { .. } => "io-error",
            Error::Parse { .. } => "parse-error",
            Error::Usage(_) => "usage-error",
        }
    }

    /// Process exit code: usage mistakes exit 2, runtime failures exit 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }
}
