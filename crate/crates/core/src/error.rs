use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid bounds: {0}")]
    Bounds(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("invalid network: {0}")]
    Network(String),

    #[error("function is not monotone on the sampled range: {0}")]
    NotMonotone(String),

    #[error("not supported by the descent solvers: {0}")]
    Unsupported(String),

    #[error("root finder precondition violated: {0}")]
    RootBracket(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("line search failed after {trials} trials (gap {gap:e})")]
    LineSearch { trials: u32, gap: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("instance generation failed: {0}")]
    Generation(String),

    #[error("instance format: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
