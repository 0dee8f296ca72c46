use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("class {0} has no training rows")]
    MissingClass(usize),

    #[error("invalid interval: {0}")]
    InvalidInterval(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("unknown selector `{0}`")]
    UnknownSelector(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
