use thiserror::Error;

/// Why an active-set walk along a segment had to give up and ask for a QP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FallbackReason {
    /// The updated active rows of `G` lost full row rank on a crossed facet.
    RankLoss,
    /// More than one facet was crossed at the same point.
    MultipleFacets,
    /// The segment crossed more facets than the walk allows.
    Runaway,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("ill-conditioned matrix ({what}, condition {condition:.3e})")]
    IllConditioned { what: &'static str, condition: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("problem is infeasible")]
    Infeasible,

    #[error("problem is unbounded")]
    Unbounded,

    #[error("set operation produced an empty set: {0}")]
    EmptyResult(&'static str),

    #[error("dimension {0} is above the supported range")]
    DimensionTooHigh(usize),

    #[error("{count} disturbance vertex sequences exceed the limit of {limit}")]
    TooManyVertices { count: u128, limit: u128 },

    #[error("maximal admissible set iteration did not terminate within {0} steps")]
    NoTermination(usize),

    #[error("terminal set is empty")]
    EmptyTerminal,

    #[error("tightened constraint set is empty: {0}")]
    EmptyTightened(&'static str),

    #[error("horizon rule undefined: {0}")]
    Undefined(&'static str),

    #[error("active-set iteration cycled ({0} iterations)")]
    CycleDetected(usize),

    #[error("regional update requires a QP solve ({0:?})")]
    FallbackRequired(FallbackReason),

    #[error("initial state sampling stalled ({accepted} accepted out of {tried} draws)")]
    SamplingStalled { accepted: usize, tried: usize },

    #[error("constraint violation at step {step}: {what}")]
    ConstraintViolation { step: usize, what: String },

    #[error("trajectory did not reach the target within {0} steps")]
    MaxStepsExceeded(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
