use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The truncated Hilbert space does not fit the configured budget.
    #[error("basis dimension {dim} exceeds the limit of {limit} states")]
    Resource { dim: u128, limit: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, Error>;
