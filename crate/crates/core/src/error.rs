//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Score matrices must be at least 2x2.
    #[error("matrix must be at least 2x2, got n={0}")]
    TooSmall(usize),

    /// Input rows of unequal length, or row count != column count.
    #[error("matrix is not square: {0}")]
    NotSquare(String),

    /// NaN or infinity in the input scores.
    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    /// The centered matrix is identically zero, so the requested
    /// normalization is undefined.
    #[error("centered matrix is identically zero; normalization undefined")]
    ZeroMatrix,

    /// Custom normalization factors must be strictly positive.
    #[error("normalization factor must be > 0, got {0}")]
    NonPositive(f64),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    /// Exhaustive enumeration is capped at n <= 8 (8! = 40320).
    #[error("exhaustive enumeration supports n <= 8, got n={0}")]
    TooLarge(usize),

    /// A kernel's g(t,u) failed the symmetry probe.
    #[error("kernel g is not symmetric at ({t}, {u}): |g(t,u)-g(u,t)| = {delta:e}")]
    SymmetryViolation { t: f64, u: f64, delta: f64 },

    /// Covariance matrix stayed indefinite after jitter escalation.
    #[error("covariance matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("alpha function has zero L2 norm")]
    ZeroAlpha,

    /// Two step paths live on different grids.
    #[error("paths on incompatible grids: n={0} vs n={1}")]
    GridMismatch(usize, usize),

    /// Sample standard deviation is zero; a test statistic is undefined.
    #[error("degenerate sample: standard deviation is zero")]
    DegenerateSample,

    /// Joint moments require i < j.
    #[error("joint moment requires i < j, got i={i}, j={j}")]
    IndexOrder { i: usize, j: usize },

    #[error("argument {0} outside [0,1]")]
    RangeError(f64),

    #[error("unknown verify suite '{0}'")]
    UnknownSuite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("fernique probe requires beta in (0, 2], got {0}")]
    BadBeta(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
