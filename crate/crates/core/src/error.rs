use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation precondition (dimension mismatch, zero vector, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}: missing input")]
    MissingInput { path: PathBuf },

    #[error("{path}: i/o error: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed binary payload; `offset` is the byte position where decoding failed.
    #[error("{path}: format error at byte {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    /// Malformed text record; `line` is 1-based.
    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate identity {id} in frame {frame}")]
    DuplicateIdentity { frame: u32, id: u32 },

    #[error("policy {policy} unavailable for stream {stream_id}: missing {field}")]
    PolicyUnavailable {
        policy: &'static str,
        stream_id: u32,
        field: &'static str,
    },

    #[error("no correctly recognized features to build a template from")]
    NoTemplate,

    #[error("infeasible scenario: {0}")]
    Feasibility(String),

    #[error("matrix too large for exhaustive search: {rows}x{cols} (limit 8)")]
    Size { rows: usize, cols: usize },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput { path }
        } else {
            Error::Io { path, source }
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingInput { .. } => 2,
            Error::Format { .. }
            | Error::Parse { .. }
            | Error::DuplicateIdentity { .. }
            | Error::Config(_) => 3,
            _ => 1,
        }
    }
}
