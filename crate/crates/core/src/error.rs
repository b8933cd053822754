//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedLine {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unknown label {label:?}; scale defines [{known}]")]
    UnknownLabel { label: String, known: String },

    #[error("duplicate candidate_id {candidate_id:?} within subtask {subtask:?}")]
    DuplicateCandidate {
        candidate_id: String,
        subtask: String,
    },

    #[error("invalid record {candidate_id:?}: {message}")]
    InvalidRecord {
        candidate_id: String,
        message: String,
    },

    #[error("invalid pool {pool_id:?}: {message}")]
    InvalidPool { pool_id: String, message: String },

    #[error("invalid label scale: {0}")]
    InvalidScale(String),

    #[error("zero probability mass over scale labels")]
    ZeroMass,

    #[error("no pairwise responses given")]
    NoResponses,

    #[error("mixed {what} in input: {a:?} vs {b:?}")]
    MixedInput { what: String, a: String, b: String },

    #[error("empty score sample for group {group:?}")]
    EmptySample { group: String },

    #[error("non-finite score in sample for group {group:?}")]
    NonFiniteScore { group: String },

    #[error("no cross-group pairs between {protected:?} and {reference:?}")]
    NoCrossPairs {
        protected: String,
        reference: String,
    },

    #[error("sample too small: need at least {need}, got {got}")]
    SampleTooSmall { need: usize, got: usize },

    #[error("zero variance: {context}")]
    ZeroVariance { context: String },

    #[error("group {group:?} is empty")]
    EmptyGroup { group: String },

    #[error("cannot sample {m} candidates from a population of {population}")]
    PopulationTooSmall { m: usize, population: usize },

    #[error("missing score for candidate {candidate_id:?} in pool {pool_id:?}")]
    MissingScore {
        candidate_id: String,
        pool_id: String,
    },

    #[error("unknown candidate {candidate_id:?} referenced by {context}")]
    UnknownCandidate {
        candidate_id: String,
        context: String,
    },

    #[error("group {group:?} never appears in the selection outcomes")]
    NoAppearances { group: String },

    #[error("group {group:?} has no qualified candidates; equal-opportunity gap is undefined")]
    NoQualified { group: String },

    #[error("constant input series; Pearson correlation is undefined")]
    ConstantSeries,

    #[error("rankings cover different model sets")]
    MismatchedModelSets,

    #[error("rank cutoff {n} outside 1..={max}")]
    BadRankCutoff { n: usize, max: usize },

    #[error("invalid distribution parameters: {0}")]
    InvalidDistribution(String),

    #[error("no qualifying seed found in {attempts} attempts")]
    RetryBudgetExhausted { attempts: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
