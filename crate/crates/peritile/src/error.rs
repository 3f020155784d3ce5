use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular basis: lattice generators must be linearly independent")]
    SingularBasis,
    #[error("operation not supported in dimension {dim}: {what}")]
    DimensionUnsupported { dim: usize, what: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
