use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector whose L2 norm is at or below [`crate::ZERO_NORM_TOL`].
    #[error("vector has (near) zero norm")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid cluster count: {0}")]
    InvalidK(String),
    #[error("invalid side information: {0}")]
    InvalidSideInfo(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("unknown relationship type `{0}`")]
    UnknownRelationshipType(String),
    #[error("invalid family `{fid}`: {reason}")]
    InvalidFamily { fid: String, reason: String },
    #[error("not enough negative candidates in fold {fold} for {group}: need {needed}, have {available}")]
    InsufficientCandidates {
        fold: usize,
        group: String,
        needed: usize,
        available: usize,
    },
    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("score matrix is empty")]
    EmptyMatrix,
    #[error("track has no frames")]
    EmptyTrack,
    #[error("no scores supplied")]
    EmptyScores,
    #[error("invalid percentile {0}; expected a value in (0, 100]")]
    InvalidPercentile(f64),
    #[error("invalid threshold {0}")]
    InvalidThreshold(f64),

    #[error("scored pair set is empty")]
    EmptySet,
    #[error("both genuine and imposter labels are required{0}")]
    DegenerateLabels(String),
    #[error("pair {0} has no relationship type or no threshold for its type")]
    MissingType(usize),
    #[error("target FAR {0} cannot be reached")]
    UnreachableTarget(f64),
    #[error("invalid target rate {0}; expected a value in (0, 1)")]
    InvalidTarget(f64),
    #[error("reported FAR must be positive")]
    ZeroReported,
    #[error("pair {0} has no subgroup tag")]
    MissingSubgroup(usize),
    #[error("ranked list for probe `{0}` has no relevant entry")]
    NoRelevant(String),
    #[error("invalid ranked list for probe `{probe}`: {reason}")]
    InvalidRanking { probe: String, reason: String },
    #[error("label `{0}` is not one of the declared classes")]
    UnknownClass(String),

    #[error("template is empty")]
    EmptyTemplate,
    #[error("a training class is empty")]
    EmptyClass,
    #[error("negative set is empty")]
    EmptyNegatives,
    #[error("negative set shares media `{0}` with a compared template")]
    NegativesOverlap(String),
    #[error("gallery adaptation needs at least two templates")]
    SingletonGallery,

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
