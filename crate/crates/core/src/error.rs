use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Training,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty vocabulary: no term occurs at least {min_count} times")]
    EmptyVocabulary { min_count: u64 },

    #[error("invalid pattern {0:?}: `*` is only allowed as the final character")]
    InvalidPattern(String),

    #[error("term not in vocabulary: {0:?}")]
    OutOfVocabulary(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("corpus too short: {0}")]
    CorpusTooShort(String),

    #[error("training diverged")]
    TrainingDiverged,

    #[error("no seed pattern matches the vocabulary (unmatched: {})", .unmatched.join(", "))]
    NoSeedMatches { unmatched: Vec<String> },

    #[error("seed term {0:?} has a zero-norm vector")]
    ZeroNormSeed(String),

    #[error("probabilistic scoring requires output-layer weights")]
    MissingOutputLayer,

    #[error("vocabulary mismatch: word polarity and corpus were indexed against different vocabularies")]
    VocabularyMismatch,

    #[error("combination requires probabilistic (nonnegative) scores (document {0:?})")]
    NegativeScore(String),

    #[error("perplexity undefined: seeds absent from corpus")]
    PerplexityUndefined,

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("rank {k} exceeds the matrix rank bound {bound}")]
    RankTooLarge { k: usize, bound: usize },

    #[error("no sentence contains a vocabulary term")]
    NoSentences,

    #[error("sample size {size} exceeds dictionary size {available}")]
    SampleTooLarge { size: usize, available: usize },

    #[error("smoothing needs at least two distinct dates, got {0}")]
    InsufficientDates(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
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

    pub fn parse(origin: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            origin: origin.into(),
            line,
            message: message.into(),
        }
    }

    /// Wraps the error with a description of the condition that produced it.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidPattern(_)
            | Error::InvalidConfig(_)
            | Error::MissingOutputLayer
            | Error::RankTooLarge { .. }
            | Error::SampleTooLarge { .. } => ErrorKind::Config,
            Error::TrainingDiverged => ErrorKind::Training,
            Error::Context { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }
}
