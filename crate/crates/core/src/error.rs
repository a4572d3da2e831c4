use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NceError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("point outside noise support: {0}")]
    Support(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("numeric error at sample {index}: {what}")]
    Numeric { index: usize, what: String },
    #[error("objective diverged at iteration {iter}: {what}")]
    Divergence { iter: usize, what: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("rank deficient matrix: {0}")]
    Rank(String),
    #[error("infeasible bound: {0}")]
    InfeasibleBound(String),
}

pub type Result<T> = std::result::Result<T, NceError>;
