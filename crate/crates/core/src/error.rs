use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("structural mismatch: {0}")]
    Structure(String),
    #[error("dangling reference: node {0}")]
    DanglingRef(usize),
    #[error("gate certification failed: {0}")]
    Certification(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
