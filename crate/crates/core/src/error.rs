use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// The LevT prediction head a scorer answered for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Deletion,
    Insertion,
    Words,
}

impl std::fmt::Display for Head {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Head::Deletion => "deletion",
            Head::Insertion => "insertion",
            Head::Words => "words",
        })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid token {token:?} at position {position}")]
    InvalidToken { token: String, position: usize },

    #[error("undefined TER denominator: reference is empty")]
    EmptyReference,

    #[error("shift-free alignment required for tagging")]
    ShiftInAlignment,

    #[error("alignment covers {covered} hypothesis positions but hypothesis has {expected}")]
    CoverageMismatch { covered: usize, expected: usize },

    #[error("length mismatch: {what} (expected {expected}, got {actual})")]
    LengthMismatch {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("sentence {index}: {what} length mismatch (pred {pred}, gold {gold})")]
    SentenceMismatch {
        index: usize,
        what: &'static str,
        pred: usize,
        gold: usize,
    },

    #[error("empty tag set")]
    EmptyTagSet,

    #[error("dangling continuation: last token {0:?} carries the continuation marker")]
    DanglingContinuation(String),

    #[error("token {position} is a bare continuation marker")]
    BareMarker { position: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("insertion count {count} at gap {gap} exceeds maximum {max}")]
    CountOutOfRange { gap: usize, count: usize, max: usize },

    #[error("malformed {head} distribution: {reason}")]
    MalformedHead { head: Head, reason: String },

    #[error("{head} scorer protocol violation: {reason}")]
    Protocol { head: Head, reason: String },

    #[error("malformed sequence model distribution: {0}")]
    MalformedDistribution(String),

    #[error("translator {name} failed: {reason}")]
    Translator { name: String, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}:{line}: {reason}")]
    Format { path: PathBuf, line: usize, reason: String },

    #[error("{0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    IoBare(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn length(what: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::LengthMismatch {
            what: what.into(),
            expected,
            actual,
        }
    }

    /// Process exit code used by the command-line tool.
    ///
    /// 1 for usage and IO problems, 2 for data-format violations, 3 for
    /// plug-in protocol violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::IoBare(_) | Error::InvalidParameter(_) => 1,
            Error::Translator { .. } => 1,
            Error::Protocol { .. } | Error::MalformedHead { .. } => 3,
            Error::MalformedDistribution(_) => 3,
            _ => 2,
        }
    }
}
