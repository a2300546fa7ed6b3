use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown event type `{token}` (not in the dataset vocabulary)")]
    Vocabulary { token: String },

    #[error("invalid match {match_id}: {reason}")]
    InvalidMatch { match_id: String, reason: String },

    #[error("event range [{start}, {end}] out of bounds for match with {len} events")]
    Range { start: usize, end: usize, len: usize },

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("training aborted: {0}")]
    Training(String),

    #[error("not enough negative material: needed {needed} negative bags, could place {available}")]
    InsufficientNegatives { needed: usize, available: usize },

    #[error("{0}")]
    NoPositives(String),

    #[error("training set has a single class ({0})")]
    SingleClass(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact {artifact}; run `{producer}` first")]
    MissingArtifact { artifact: PathBuf, producer: String },

    #[error("artifact {path} was produced with config hash {found}, expected {expected}")]
    MixedConfig {
        path: PathBuf,
        found: String,
        expected: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("audio error: {0}")]
    Audio(String),

    #[error("generator error: {0}")]
    Generator(String),

    #[error("{0}")]
    Data(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
