use thiserror::Error;

/// Errors produced by the `fracstep` library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grading exponent {0}: must be >= 1")]
    InvalidGrading(f64),
    #[error("a mesh needs at least one step")]
    EmptyMesh,
    #[error("mesh must start at t = 0, got {0}")]
    NonZeroStart(f64),
    #[error("mesh nodes must be strictly increasing (node {index}: {prev} -> {next})")]
    NonMonotone { index: usize, prev: f64, next: f64 },
    #[error("non-finite value {value} in {what}")]
    NonFinite { what: &'static str, value: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("series did not converge within {terms} terms")]
    NonConvergence { terms: usize },
    #[error("sum-of-exponentials approximation not certified: {0}")]
    SoeNotCertified(String),
    #[error("sum-of-exponentials tolerance {eps:e} unreachable within {budget} nodes")]
    ToleranceUnreachable { eps: f64, budget: usize },
    #[error("t = {t} lies outside the certified window [{lo}, {hi}]")]
    OutOfWindow { t: f64, lo: f64, hi: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("kernel diagonal A^({n})_0 = {value} is not positive")]
    ZeroDiagonal { n: usize, value: f64 },
    #[error("mesh is not uniform (ratio {ratio} at k = {k})")]
    NonUniformMesh { k: usize, ratio: f64 },
    #[error("max step {max_step} exceeds the admissible {limit}")]
    StepRestrictionViolated { max_step: f64, limit: f64 },
    #[error("singular linear system at step {n}")]
    SingularSystem { n: usize },
    #[error("degenerate kernel at row {n}: A_0 = A_1")]
    DegenerateKernel { n: usize },
    #[error("errors must be positive, got {0}")]
    NonPositiveError(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
