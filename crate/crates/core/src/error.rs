use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("conflicting values for attribute {attribute}: {first:?} vs {second:?}")]
    ParseConflict {
        attribute: String,
        first: String,
        second: String,
    },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("description does not parse to a full state: {0:?}")]
    UnparseableState(String),
    #[error("a game needs at least one distractor")]
    ZeroDistractors,
    #[error("could not sample a distinct distractor within {attempts} attempts")]
    DistractorCapacity { attempts: usize },
    #[error("truth column has {len} entries, expected {expected}")]
    ColumnLength { len: usize, expected: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("no utterance is true of the target")]
    AllTargetFalse,
    #[error("proposer returned no usable utterances after a retry")]
    ProposerExhausted,
    #[error("proposer response contained no list items")]
    EmptyProposal,
    #[error("could not extract a yes/no answer from: {0:?}")]
    AmbiguousAnswer(String),
    #[error("could not extract an utterance from an empty response")]
    EmptyResponse,
    #[error("replay cache miss for key {0}")]
    CacheMiss(String),
    #[error("replay mode requires an existing cache file: {0}")]
    MissingCache(PathBuf),
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed chat response: {0}")]
    MalformedResponse(String),
    #[error("backend error at iteration {iteration}: {source}")]
    Engine {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap a backend error with the engine iteration it occurred in.
    pub(crate) fn at_iteration(self, iteration: usize) -> Error {
        Error::Engine {
            iteration,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
