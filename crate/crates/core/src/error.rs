use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ForgeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("session {session}: {message}")]
    Validation { session: u64, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("clip belongs to session {clip_session}, got session {session}")]
    SessionMismatch { clip_session: u64, session: u64 },

    #[error("time {t_ms} ms is outside [0, {duration_ms})")]
    TimeOutOfRange { t_ms: u64, duration_ms: u64 },

    #[error("session {session} lasts {duration_ms} ms, shorter than the 3000 ms minimum clip")]
    Unsampleable { session: u64, duration_ms: u64 },

    #[error("event {event} not found in session {session}")]
    UnknownEvent { session: u64, event: u64 },

    #[error("chunk inconsistent with clip: {0}")]
    Consistency(String),

    #[error("no template matches signature {0}")]
    Coverage(String),

    #[error("lexicon has no entry for {0}")]
    Lexicon(String),

    #[error("temporal reference {0} matches no event in the clip")]
    DanglingReference(String),

    #[error("temporal reference {0} matches more than one event in the clip")]
    AmbiguousReference(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("{0}")]
    Empty(String),
}

impl ForgeError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ForgeError::Io {
            path: path.into(),
            source,
        }
    }

    /// A config file that does not parse is a usage error, not a data error.
    pub(crate) fn bad_config(path: &std::path::Path, err: &serde_json::Error) -> Self {
        ForgeError::Config(format!("{}: line {}: {err}", path.display(), err.line()))
    }

    pub(crate) fn json(line: usize, err: &serde_json::Error) -> Self {
        ForgeError::Parse {
            line,
            message: err.to_string(),
        }
    }
}
