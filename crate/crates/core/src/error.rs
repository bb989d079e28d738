use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid split ratio: {0}")]
    InvalidRatio(String),
    #[error("dimension mismatch at index {index}: expected {expected}, got {got}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("label kind mismatch: {0}")]
    LabelKind(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("state id {0} outside state set")]
    StateOutOfRange(usize),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("decoder not fitted")]
    NotFitted,
    #[error("insufficient training data: {0}")]
    InsufficientData(String),
    #[error("unsupported retrain mode: {0}")]
    UnsupportedRetrain(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid oracle config: {0}")]
    OracleConfig(String),
    #[error("stream out of order at position {position}: index {index} follows {previous}")]
    OutOfOrder {
        position: usize,
        index: usize,
        previous: usize,
    },
    #[error("event range [{start}, {end}] outside stream of length {len}")]
    EventOutOfRange { start: usize, end: usize, len: usize },
    #[error("invalid slice config: {0}")]
    SliceConfig(String),
    #[error("no fault-covered executions")]
    NoFaults,
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("degrees of freedom must be positive, got {0}")]
    DegreesOfFreedom(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("missing ground truth at position {0}")]
    MissingTruth(usize),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
