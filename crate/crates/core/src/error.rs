use thiserror::Error;

/// Errors raised anywhere in the benchmark engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid dataset `{name}`: {reason}")]
    InvalidDataset { name: String, reason: String },

    #[error("failed to load {path}: {reason}")]
    Load { path: String, reason: String },

    #[error("split error: {0}")]
    Split(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("dimension mismatch: expected {expected} columns, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("pool exhausted: requested {requested} points but only {available} unlabeled")]
    PoolExhausted { requested: usize, available: usize },

    #[error("strategy `{strategy}` does not support this task: {reason}")]
    UnsupportedTask { strategy: String, reason: String },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("test-set firewall violated: {0}")]
    Firewall(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
