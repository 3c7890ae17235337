use std::path::PathBuf;

/// Errors produced by every module in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid class count {k}: at least 2 ordered classes are required")]
    InvalidClassCount { k: usize },

    #[error("invalid rank label {value}: labels must lie in 1..={k}")]
    InvalidLabel { value: i64, k: usize },

    #[error("boundaries must be strictly increasing (thresholds[{index}] = {value} does not exceed its predecessor)")]
    NonIncreasingThresholds { index: usize, value: f64 },

    #[error("expected {expected} thresholds for {k} classes, got {got}")]
    ThresholdCount {
        expected: usize,
        got: usize,
        k: usize,
    },

    #[error("margin must be finite and non-negative, got {gamma}")]
    InvalidMargin { gamma: f64 },

    #[error("margin {gamma} is infeasible: narrowest segment has width {min_width} < 2*margin")]
    InfeasibleMargin { gamma: f64, min_width: f64 },

    #[error("invalid pair: lower class {lower} has no upper neighbour for k = {k}")]
    InvalidPair { lower: usize, k: usize },

    #[error("pair labels must be adjacent: got {lower} and {upper}")]
    NonAdjacentPair { lower: usize, upper: usize },

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("stale tape: the model was updated after this forward pass was recorded")]
    StaleTape,

    #[error("numeric fault: {0}")]
    NumericFault(String),

    #[error("class {label} has no examples{context}")]
    UncoverableClass { label: usize, context: String },

    #[error("empty input: {what} requires at least one element")]
    EmptySet { what: &'static str },

    #[error("{path}:{line}: {msg}")]
    CsvParse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("checkpoint {path}: {msg}")]
    CheckpointFormat { path: PathBuf, msg: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code taxonomy: numeric instability is distinguishable
    /// from user or configuration errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericFault(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
