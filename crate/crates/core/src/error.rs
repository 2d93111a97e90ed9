use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: timestamp {found} precedes previous timestamp {previous}")]
    TimestampRegression {
        line: usize,
        previous: u64,
        found: u64,
    },

    #[error("non-finite reward {0}")]
    NonFiniteReward(f64),

    #[error("id out of range: {0}")]
    OutOfRange(String),

    #[error("cannot free {needed} pages: fast device capacity is {capacity}")]
    Capacity { needed: u64, capacity: u64 },

    #[error("{what} needs {needed} bits, budget is {limit}")]
    Budget {
        what: &'static str,
        needed: usize,
        limit: usize,
    },

    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),

    #[error("baseline policy `{0}` not present in any report")]
    MissingBaseline(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
