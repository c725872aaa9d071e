use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown dataset format `{0}` (expected jsonl, tsv-pairs or plain-text-per-line)")]
    UnknownFormat(String),

    #[error("corpus format error in {path}: {skipped} of {lines} lines malformed")]
    CorpusFormat { path: PathBuf, skipped: u64, lines: u64 },

    #[error("duplicate record id `{id}` at line {line}")]
    DuplicateRecordId { id: String, line: u64 },

    #[error("lexicon {path}: {message}")]
    Lexicon { path: PathBuf, message: String },

    #[error("duplicate term `{term}` in axis `{axis}` (groups `{first}` and `{second}`)")]
    DuplicateTerm {
        axis: String,
        term: String,
        first: String,
        second: String,
    },

    #[error("no lexicons given to the matcher")]
    NoLexicons,

    #[error("no {0} lexicon loaded")]
    MissingLexicon(&'static str),

    #[error("unknown axis `{0}`")]
    UnknownAxis(String),

    #[error("unknown signal `{0}`")]
    UnknownSignal(String),

    #[error("signal `{signal}` has kind {actual}, expected {expected}")]
    SignalKind {
        signal: String,
        expected: String,
        actual: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("provider `{provider}` protocol error: {message}")]
    Protocol { provider: String, message: String },

    #[error("provider `{provider}` transport error: {message}")]
    Transport { provider: String, message: String },

    #[error("provider `{provider}` does not supply signal `{signal}`")]
    UnsupportedSignal { provider: String, signal: String },

    #[error("analysis `{0}` is not registered")]
    UnregisteredAnalysis(String),

    #[error("analysis `{id}` expects a {expected} payload, got {actual}")]
    PayloadMismatch {
        id: String,
        expected: String,
        actual: String,
    },

    #[error("report needs at least one card")]
    EmptyReport,

    #[error("selection `{selection}` needs analysis `{analysis}`, which the plan does not run")]
    SelectionNotRun { selection: String, analysis: String },

    #[error("invalid selection `{0}`")]
    InvalidSelection(String),

    #[error("invalid plan:\n{}", .0.join("\n"))]
    InvalidPlan(Vec<String>),

    #[error("resource `{name}`: {message}")]
    Resource { name: String, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
