use thiserror::Error;

/// Errors produced by data validation, estimation, and testing.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("negative count {value} in field {field} of group {group}")]
    NegativeCount {
        group: usize,
        field: &'static str,
        value: i64,
    },

    #[error("study contains no groups")]
    EmptyStudy,

    #[error("group {0} has no subjects (m = n = 0)")]
    EmptyGroup(usize),

    #[error("infeasible parameters: {0}")]
    InfeasibleParams(String),

    #[error("log-likelihood domain error: {0}")]
    DomainError(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("no interior stationary point; likelihood is maximized at the boundary pi = {boundary}")]
    NoInteriorRoot { boundary: f64 },

    #[error("R is not estimable without bilateral data (M = 0)")]
    RNotEstimable,

    #[error("fit did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NotConverged {
        iterations: u32,
        gradient_norm: f64,
    },

    #[error("information matrix is singular (Schur complement {0:.3e})")]
    SingularInformation(f64),

    #[error("simplified and matrix forms disagree: matrix {matrix}, simplified {simplified}")]
    SimplifiedFormMismatch { matrix: f64, simplified: f64 },

    #[error("{0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
