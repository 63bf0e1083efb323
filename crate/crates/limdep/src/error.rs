//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    // --- data ingestion ---
    #[error("column '{0}' not found in header")]
    MissingColumn(String),
    #[error("target column '{column}' is not numeric at data row {row}: '{value}'")]
    NonNumericTarget {
        column: String,
        row: usize,
        value: String,
    },
    #[error("target value {value} at data row {row} is negative")]
    NegativeTarget { row: usize, value: f64 },
    #[error("file has no rows (header alone does not make a dataset)")]
    EmptyFile,
    #[error("missing value in column '{column}' at data row {row}")]
    MissingValue { column: String, row: usize },
    #[error("no feature columns left after extracting the target")]
    EmptyFeatureSet,
    #[error("degenerate target: {0}")]
    DegenerateTarget(String),
    #[error("no permutation out of {attempts} kept a zero and a positive row in both parts")]
    CannotStratify { attempts: usize },
    #[error("need at least {min} rows, got {got}")]
    TooFewRows { min: usize, got: usize },

    // --- statistics ---
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero sample variance in '{0}'")]
    ZeroVariance(&'static str),
    #[error("zero mean, coefficient of variation undefined")]
    ZeroMean,
    #[error("noise variance is zero, ratio undefined")]
    ZeroNoise,
    #[error("signal-to-noise ratio must be nonnegative, got {0}")]
    NegativeSnr(f64),
    #[error("no rows with a positive target")]
    EmptyPositiveSubset,
    #[error("correlation input {0} outside [-1, 1]")]
    OutOfRange(f64),
    #[error("diagnostics in theoretical mode need latent targets; use the empirical variant")]
    RequiresLatents,

    // --- learners ---
    #[error("invalid learner spec: {0}")]
    InvalidLearnerSpec(String),
    #[error("forest target is constant; nothing to split on")]
    ConstantTarget,
    #[error("query features have {got} columns, model was trained on {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("positive subset has {got} rows, need at least {min} to fit the amount model")]
    PositiveSubsetTooSmall { min: usize, got: usize },
    #[error("model file is not a supported format version: {0}")]
    UnsupportedModelVersion(u32),

    // --- synthetic data ---
    #[error("degenerate synthetic spec: {0}")]
    DegenerateSpec(String),

    // --- io / serialization ---
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
