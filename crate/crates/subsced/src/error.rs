use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("rank deficient design: reciprocal condition number {rcond:.3e} below 1e-12")]
    RankDeficient { rcond: f64 },
    #[error("weight vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("weights must be strictly positive and finite, entry {index} is {value}")]
    NonPositive { index: usize, value: f64 },
    #[error("matrix is not symmetric, max asymmetry {0:.3e}")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite, min eigenvalue {0:.3e}")]
    NotPd(f64),
    #[error("matrix is not positive semidefinite, min eigenvalue {0:.3e}")]
    NonPsd(f64),
    #[error("eigenbases do not agree, off-diagonal mass {0:.3e} after rotation")]
    NotSimultaneouslyDiagonalizable(f64),
    #[error("group order is not a permutation of 0..{0}")]
    BadOrdering(usize),
    #[error("scedastic function degenerate at covariate {index} (|x| = {value})")]
    DegenerateCovariate { index: usize, value: f64 },
    #[error("batch {0} is empty")]
    EmptyBatch(usize),
    #[error("scedastic function must be positive, got {value} at omega = {omega}")]
    NonPositiveValue { omega: f64, value: f64 },
    #[error("function `{0}` does not satisfy the growth/ratio monotonicity conditions")]
    GrmFailed(String),
    #[error("did not converge within {0} iterations")]
    NotConverged(usize),
    #[error("scale parameter collapsed below 1e-12")]
    DegenerateScale,
    #[error("sandwich hessian is numerically singular")]
    SingularHessian,
    #[error("leverage {leverage} at observation {index} too close to one")]
    LeverageOne { index: usize, leverage: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;
