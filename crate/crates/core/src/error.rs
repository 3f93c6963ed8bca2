use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its admissible domain or dimensions disagree.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A graph violates a structural requirement (cycle, node-count mismatch).
    #[error("structural error: {0}")]
    Structure(String),

    /// A non-finite or otherwise unusable number was produced during computation.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("{what}: unsupported schema version {found} (this build reads version {expected})")]
    Schema {
        what: String,
        found: u32,
        expected: u32,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the error's category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) => 2,
            Error::Io { .. } => 3,
            Error::Parse { .. } | Error::Schema { .. } => 4,
            Error::Numeric(_) => 5,
            Error::Structure(_) => 6,
        }
    }

    /// Prefixes the message with extra context, keeping the category.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Parameter(m) => Error::Parameter(format!("{ctx}: {m}")),
            Error::Structure(m) => Error::Structure(format!("{ctx}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("{ctx}: {m}")),
            Error::Parse { location, message } => Error::Parse {
                location: format!("{ctx}: {location}"),
                message,
            },
            Error::Io { path, source } => Error::Io {
                path,
                source: std::io::Error::new(source.kind(), format!("{ctx}: {source}")),
            },
            other => other,
        }
    }
}
