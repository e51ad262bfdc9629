use crate::solver::SolveReport;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point:?} lies outside the mesh domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("non-finite value in element {element} at {point:?}")]
    NonFinite { element: usize, point: Vec<f64> },

    #[error("entry ({row}, {col}) is not part of the sparsity pattern")]
    PatternViolation { row: usize, col: usize },

    #[error(
        "conjugate gradients did not converge within {} iterations (criterion {:e})",
        .0.iterations,
        .0.criterion
    )]
    NotConverged(Box<SolveReport>),

    #[error("dimension {0} is not supported here")]
    UnsupportedDimension(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(message: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(message.into()))
}
