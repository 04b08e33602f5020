use thiserror::Error;

/// Errors raised by the inference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("covariance is numerically singular: smallest eigenvalue {min_eigenvalue:e} <= floor {floor:e}")]
    SingularCovariance { min_eigenvalue: f64, floor: f64 },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("bad size: {0}")]
    BadSize(String),

    #[error("bad configuration: {0}")]
    BadConfig(String),

    #[error("design matrix is rank deficient (relative smallest singular value {0:e})")]
    RankDeficient(f64),

    #[error("treatment cell {0} is empty")]
    EmptyCell(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("bad simulation spec: {0}")]
    BadSpec(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
