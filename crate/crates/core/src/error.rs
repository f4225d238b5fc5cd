use thiserror::Error;

/// Errors raised by the numerical and sampling routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("state space too large: N = {n} exceeds the exact-enumeration limit {max}")]
    TooLarge { n: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("fixed point diverged after {iterations} iterations (last increment {last_increment:.3e})")]
    Divergence { iterations: usize, last_increment: f64 },

    #[error("fixed point did not converge in {iterations} iterations (last increment {last_increment:.3e})")]
    NoConvergence { iterations: usize, last_increment: f64 },

    #[error("kernel not admissible: {0}")]
    Admissibility(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
