use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty stream")]
    EmptyStream,

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("rating required for positive filtering")]
    MissingRating,

    #[error("invalid event: {0}")]
    InvalidEvent(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cannot build graph from empty stream")]
    EmptyGraph,

    #[error("user not in training graph: {0}")]
    UnknownUser(String),

    #[error("user {user} has no activity at or before t={t}")]
    NoActivityBefore { user: String, t: i64 },

    /// Every evaluation window had zero evaluable users.
    #[error("nothing evaluated")]
    NothingEvaluated,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
