use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain mismatch: [{0}, {1}] vs [{2}, {3}]")]
    DomainMismatch(f64, f64, f64, f64),

    #[error("invalid interval [{0}, {1}]")]
    InvalidInterval(f64, f64),

    #[error("invalid piecewise function: {0}")]
    InvalidPiecewise(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("loss value {value} outside [0, 1] on cell {cell}")]
    LossOutOfRange { value: f64, cell: usize },

    #[error("interval [{0}, {1}] does not overlap the domain")]
    DisjointBall(f64, f64),

    #[error("partition is not refined by ball [{0}, {1}]")]
    NotRefined(f64, f64),

    #[error("quadrature did not converge after {0} panels")]
    QuadratureDiverged(usize),

    #[error("degenerate sampling weights: {0}")]
    DegenerateWeights(String),
}

impl Error {
    pub(crate) fn domain_mismatch(a: crate::Interval, b: crate::Interval) -> Self {
        Error::DomainMismatch(a.lo, a.hi, b.lo, b.hi)
    }
}
