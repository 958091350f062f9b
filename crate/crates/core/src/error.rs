use std::path::PathBuf;

use thiserror::Error;

use crate::container::ContainerError;
use crate::options::ValueKind;
use crate::provenance::ProvenanceError;

/// Errors raised while building or running a job.
#[derive(Debug, Error)]
pub enum JobError {
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("component `{0}` is declared more than once")]
    DuplicateComponent(String),
    #[error("component name `{0}` is reserved")]
    ReservedName(String),
    #[error("event source `{0}` must be the first algorithm in the chain")]
    MisplacedSource(String),
    #[error("unknown property `{0}`")]
    UnknownProperty(String),
    #[error("`{key}` expects a {expected} value, got `{found}`")]
    KindMismatch { key: String, expected: ValueKind, found: String },
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("input `{path}` cannot be read: {source}")]
    Input { path: PathBuf, source: ContainerError },
    #[error("recorded input `{0}` no longer exists")]
    LineageMissing(String),
    #[error("recorded input lineage does not match: {0}")]
    LineageMismatch(String),
    #[error("algorithm `{algorithm}` failed on event {event}: {message}")]
    AlgorithmFailure { algorithm: String, event: u64, message: String },
    #[error("cannot write output: {0}")]
    WriteFailure(ContainerError),
    #[error(transparent)]
    Provenance(#[from] ProvenanceError),
    #[error("{0}")]
    InvalidPhase(&'static str),
}

impl JobError {
    /// Lineage problems are verification failures rather than operational ones.
    pub fn is_verification_failure(&self) -> bool {
        matches!(self, JobError::LineageMissing(_) | JobError::LineageMismatch(_))
    }
}
