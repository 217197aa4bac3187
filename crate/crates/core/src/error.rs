use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid probability: {0}")]
    Probability(String),

    #[error("states {0} and {1} coincide")]
    DuplicateState(usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown simplex id {0}")]
    UnknownSimplex(usize),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("factorization inconsistent with prior: {0}")]
    Inconsistent(String),

    #[error("sample {0} lies outside the quantization box")]
    OutOfBox(usize),

    #[error("sample set is empty")]
    EmptySamples,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
