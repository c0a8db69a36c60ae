use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty collection")]
    EmptyCollection,

    #[error("token not in dictionary: {0:?}")]
    UnknownToken(String),

    #[error("set index {index} out of range for collection of {len} sets")]
    SetIndexOutOfRange { index: usize, len: usize },

    #[error("invalid threshold {0:?}")]
    InvalidThreshold(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("collection of {len} sets exceeds the brute-force guard of {limit}")]
    OracleGuard { len: usize, limit: usize },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("malformed input at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
