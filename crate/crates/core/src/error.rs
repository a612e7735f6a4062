use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to write index file {path}: {source}")]
    IndexWrite {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to read index file {path}: {reason}")]
    IndexRead { path: PathBuf, reason: String },

    #[error("index integrity violation: {0}")]
    IndexIntegrity(String),

    #[error("unknown entity: {0}")]
    UnknownEntity(String),

    #[error("no parsable source files under {0}")]
    EmptyProject(PathBuf),

    #[error("similarity corpus is empty")]
    EmptyCorpus,

    #[error("referability needs at least 2 tests, got {0}")]
    InsufficientCorpus(usize),

    #[error("embedding provider failed: {0}")]
    EmbeddingProvider(String),

    #[error("model output has no fenced block starting with `package `")]
    MalformedOutput,

    #[error("intention synthesis gave up after {attempts} attempts: {last_violations}")]
    IntentionSynthesis {
        attempts: usize,
        last_violations: String,
    },

    #[error("completion provider failed: {0}")]
    Provider(String),

    #[error("replay store has no response for request hash {hash}")]
    ReplayMiss { hash: String },

    #[error("runner misconfigured: {0}")]
    RunnerConfig(String),

    #[error("failed to parse report: {0}")]
    ReportParse(String),

    #[error("coverage report has no data for {0}")]
    MissingCoverage(String),

    #[error("cannot aggregate an empty list")]
    EmptyAggregate,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Stable machine-readable name, used for structured CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::IndexWrite { .. } => "IndexWriteError",
            Error::IndexRead { .. } => "IndexReadError",
            Error::IndexIntegrity(_) => "IndexIntegrityError",
            Error::UnknownEntity(_) => "UnknownEntityError",
            Error::EmptyProject(_) => "EmptyProjectError",
            Error::EmptyCorpus => "EmptyCorpusError",
            Error::InsufficientCorpus(_) => "InsufficientCorpusError",
            Error::EmbeddingProvider(_) => "EmbeddingProviderError",
            Error::MalformedOutput => "MalformedOutputError",
            Error::IntentionSynthesis { .. } => "IntentionSynthesisError",
            Error::Provider(_) => "ProviderError",
            Error::ReplayMiss { .. } => "ReplayMissError",
            Error::RunnerConfig(_) => "RunnerConfigError",
            Error::ReportParse(_) => "ReportParseError",
            Error::MissingCoverage(_) => "MissingCoverageError",
            Error::EmptyAggregate => "EmptyAggregateError",
            Error::Config(_) => "ConfigError",
            Error::Io { .. } => "IoError",
        }
    }
}
