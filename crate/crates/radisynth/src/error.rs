use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] radisynth_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed file content; `offset` is a byte position when known.
    #[error("cannot parse {what}{}: {msg}", offset.map(|o| format!(" at byte {o}")).unwrap_or_default())]
    Parse {
        what: String,
        offset: Option<u64>,
        msg: String,
    },

    #[error("{kind} '{id}' not found in the workspace manifest")]
    NotFound { kind: String, id: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("configuration: {0}")]
    Config(String),

    /// Provenance or integrity check failure.
    #[error("workspace integrity: {0}")]
    Integrity(String),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(what: impl Into<String>, offset: Option<u64>, msg: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            offset,
            msg: msg.into(),
        }
    }

    pub fn not_found(kind: impl Into<String>, id: impl Into<String>) -> Self {
        Error::NotFound {
            kind: kind.into(),
            id: id.into(),
        }
    }

    /// Wraps an error with the name of the pipeline stage it came from.
    pub fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by the caller's input rather than by a
    /// failure while running.
    pub fn is_validation(&self) -> bool {
        use radisynth_core::Error as C;
        match self {
            Error::Core(e) => matches!(
                e,
                C::InvalidParameter(_) | C::Shape(_) | C::UnsupportedConstruct { .. }
            ),
            Error::Parse { .. } | Error::NotFound { .. } | Error::Validation(_) | Error::Config(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            Error::Io { .. } | Error::Integrity(_) => false,
        }
    }

    /// Process exit code: 1 for validation errors, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            1
        } else {
            2
        }
    }
}

/// Attaches a path to `std::io` results.
pub(crate) trait IoContext<T> {
    fn at(self, path: &std::path::Path) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: &std::path::Path) -> Result<T> {
        self.map_err(|e| Error::io(path, e))
    }
}
