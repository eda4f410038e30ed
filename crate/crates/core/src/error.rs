use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// The lattice bounding box holds more candidate points than the caller's budget.
    #[error("lattice point budget exceeded: bounding box holds {required} candidates, budget is {budget}")]
    Budget { budget: usize, required: usize },

    #[error("degenerate data: column {column} has (near-)zero variance")]
    DegenerateData { column: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("initialization failed: {0}")]
    Init(String),

    #[error("marginal fit for dimension {dim} failed: {source}")]
    Marginal {
        dim: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
