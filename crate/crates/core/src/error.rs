use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UspError {
    #[error("negative count {value} at row {row}, column {col}")]
    NegativeCount { row: usize, col: usize, value: i64 },
    #[error("table must have at least one row and one column")]
    EmptyTable,
    #[error("row {row} has {found} entries, expected {expected}")]
    RaggedTable {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("table has no observations")]
    EmptySample,
    #[error("cannot subsample {m} observations from a table with n = {n}")]
    SubsampleTooLarge { m: u64, n: u64 },
    #[error("chi-squared divergence undefined: reference cell ({row}, {col}) is zero")]
    DivergenceUndefined { row: usize, col: usize },
    #[error("statistic undefined: {0}")]
    UndefinedStatistic(String),
    #[error("sample size {n} is below the minimum {min}")]
    SampleTooSmall { n: u64, min: u64 },
    #[error("brute-force oracle limited to {max} observations, got {n}")]
    SampleTooLargeForOracle { n: usize, max: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("infeasible epsilon {epsilon}: {reason}")]
    InfeasibleEpsilon { epsilon: f64, reason: String },
    #[error("invalid mode: {0}")]
    InvalidMode(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, UspError>;
