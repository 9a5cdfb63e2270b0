use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("line {line}: utterance `{id}` references missing parent `{parent}`")]
    OrphanUtterance {
        line: usize,
        id: String,
        parent: String,
    },

    #[error("conversation `{conversation}`: reply links form a cycle")]
    CycleDetected { conversation: String },

    #[error("line {line}: duplicate utterance id `{id}`")]
    DuplicateId { line: usize, id: String },

    #[error("conversation `{conversation}`: expected exactly one root utterance, found {count}")]
    RootCount { conversation: String, count: usize },

    #[error("line {line}: reply `{id}` is timestamped before its parent (use lax ingest to accept)")]
    TimestampOrder { line: usize, id: String },

    #[error("lexicon line {line}: {reason}")]
    LexiconFormat { line: usize, reason: String },

    #[error("lexicon category `{0}` has no entries")]
    EmptyCategory(String),

    #[error("lexicon category `{0}` is declared more than once")]
    DuplicateCategoryName(String),

    #[error("exchange set is empty")]
    EmptyExchangeSet,

    #[error("no speaker in the group has a defined coordination score")]
    NoDefinedSpeakers,

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("deltas have not been detected on this corpus")]
    DeltasNotDetected,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("corpus has {utterances} utterances; the quadratic oracle accepts at most {limit}")]
    CorpusTooLarge { utterances: usize, limit: usize },

    #[error("unknown scope `{0}`")]
    UnknownScope(String),

    #[error("unknown speaker group `{0}`")]
    UnknownGroup(String),

    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error describes bad input data rather than a bad request.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            Error::InvalidConfig(_) | Error::UnknownScope(_) | Error::UnknownGroup(_)
        )
    }
}
