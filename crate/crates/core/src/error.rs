use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid json in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed {kind} file: {message}")]
    Format { kind: &'static str, message: String },

    #[error("tokenizer: {0}")]
    Tokenizer(String),

    #[error("unknown {kind} id {id:?}")]
    MissingId { kind: &'static str, id: String },

    #[error("{kind} store does not cover {count} ids (first: {sample:?})")]
    Coverage {
        kind: &'static str,
        count: usize,
        sample: Vec<String>,
    },

    #[error("vector for {id:?} has zero norm")]
    ZeroNorm { id: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("non-finite score for query {query:?}, passage {passage:?}")]
    NonFiniteScore { query: String, passage: String },

    #[error("depth {depth} is below the largest content group ({max_group_size}); pass force to override")]
    Depth { depth: usize, max_group_size: usize },

    #[error("corpus has {count} validation violations (first: {first})")]
    InvalidCorpus { count: usize, first: String },

    #[error("duplicate language tag {0:?} in classification")]
    DuplicateTag(String),

    #[error("classification lacks {what} for languages {langs:?}")]
    MissingClassification { what: &'static str, langs: Vec<String> },

    #[error("digest mismatch for {what}: expected {expected}, found {found}")]
    Digest {
        what: String,
        expected: String,
        found: String,
    },

    #[error("metric: {0}")]
    Metric(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Short stable code used by the command line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "E_IO",
            Error::Parse { .. } => "E_PARSE",
            Error::Json { .. } => "E_JSON",
            Error::Format { .. } => "E_FORMAT",
            Error::Tokenizer(_) => "E_TOKENIZER",
            Error::MissingId { .. } => "E_MISSING_ID",
            Error::Coverage { .. } => "E_COVERAGE",
            Error::ZeroNorm { .. } => "E_ZERO_NORM",
            Error::Dimension { .. } => "E_DIMENSION",
            Error::NonFiniteScore { .. } => "E_NON_FINITE",
            Error::Depth { .. } => "E_DEPTH",
            Error::InvalidCorpus { .. } => "E_INVALID_CORPUS",
            Error::DuplicateTag(_) => "E_DUPLICATE_TAG",
            Error::MissingClassification { .. } => "E_MISSING_CLASSIFICATION",
            Error::Digest { .. } => "E_DIGEST",
            Error::Metric(_) => "E_METRIC",
            Error::InvalidArgument(_) => "E_INVALID_ARGUMENT",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(kind: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            kind,
            message: message.into(),
        }
    }
}
