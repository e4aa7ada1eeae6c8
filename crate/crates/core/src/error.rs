use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("length mismatch at index {index}: {what}")]
    LengthMismatch { index: usize, what: &'static str },
    #[error("non-finite feature at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("non-positive or non-finite time at index {index}")]
    NonPositiveTime { index: usize },
    #[error("no observed events")]
    NoEventsObserved,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("invalid step function: {0}")]
    InvalidStepFunction(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("exponentiated risk score overflowed")]
    OverflowGuard,
    #[error("singular Hessian; features may be collinear or constant")]
    SingularHessian,
    #[error("optimizer did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("split is degenerate: {0}")]
    DegenerateSplit(&'static str),
    #[error("no comparable pairs")]
    NoComparablePairs,
    #[error("no cases or no controls at time {time}")]
    NoCasesOrControls { time: f64 },
    #[error("zero variance input")]
    ZeroVariance,
    #[error("censoring calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("stratum too small: need {needed} {stratum} subjects, pool has {available}")]
    InsufficientStratum { stratum: &'static str, needed: usize, available: usize },
    #[error("too few subjects ({n}) for {k} folds")]
    TooFewSubjects { n: usize, k: usize },
    #[error("every hyperparameter candidate failed")]
    AllCandidatesFailed,
    #[error("nothing to run: {0}")]
    EmptySweep(&'static str),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unparseable value at row {row}, column `{col}`: {value:?}")]
    UnparseableValue { row: usize, col: String, value: String },
    #[error("every row was dropped for missing values")]
    AllRowsDropped,
    #[error("config error: {0}")]
    Config(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
