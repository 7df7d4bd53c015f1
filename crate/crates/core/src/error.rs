use alloc::string::String;

/// Errors raised by the analysis and optimization routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// ZF needs strictly more transmit antennas than users.
    #[error("zero-forcing needs N_t > K (N_t = {n_t}, K = {k})")]
    ZfDimension { n_t: usize, k: usize },
    #[error("degenerate channel: estimate Gram matrix is not positive definite")]
    DegenerateChannel,
    /// The reduced Fisher information matrix is singular or indefinite.
    #[error("estimation impossible: reduced FIM is not positive definite")]
    EstimationImpossible,
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("non-monotone SCA step at iteration {iteration}: {previous} -> {current}")]
    NonMonotone {
        iteration: usize,
        previous: f64,
        current: f64,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
