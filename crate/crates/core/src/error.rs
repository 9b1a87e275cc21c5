use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain size mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("distributions are not weakly disjoint at element {element}")]
    NotWeaklyDisjoint { element: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("count {count} at element {element} exceeds the {limit} coin flips per bin")]
    CountExceedsTrials {
        element: usize,
        count: u64,
        limit: u64,
    },

    #[error("enumeration guard exceeded: {size} > {limit}")]
    EnumerationGuard { size: f64, limit: f64 },

    #[error("estimator failed after {attempts} attempts (max count reached ln l)")]
    EstimatorFailure { attempts: u32 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}
