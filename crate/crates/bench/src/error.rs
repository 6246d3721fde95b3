use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    /// Bad arguments or an impossible request.
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed dataset file: {0}")]
    Format(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] carmi_core::Error),
    /// A structure disagreed with the reference map.
    #[error("oracle mismatch: {0}")]
    Mismatch(String),
}

pub type BenchResultT<T> = std::result::Result<T, BenchError>;
