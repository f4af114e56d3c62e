use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed identity: {0}")]
    MalformedIdentity(String),
    #[error("identity field out of range: {0}")]
    InvalidIdentity(String),
    #[error("sequence number space exhausted")]
    ChainExhausted,
    #[error("sequence number would decrease from {current} to {requested}")]
    SqnRegression { current: u64, requested: u64 },
    #[error("pseudonym chain has no active keystream epoch")]
    ChainInactive,
    #[error("assistant pool too small: need {needed}, have {available}")]
    InsufficientPool { needed: usize, available: usize },
    #[error("not enough other active subscribers: need {needed}, have {available}")]
    InsufficientSubscribers { needed: usize, available: usize },
    #[error("observation log is empty")]
    EmptyLog,
    #[error("every assistant identity is marked")]
    AllMarked,
    #[error("unknown HSS identifier {0}")]
    UnknownHss(u32),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("registry line {line}: {reason}")]
    RegistryFormat { line: usize, reason: String },
    #[error("malformed message: {0}")]
    MalformedMessage(String),
    #[error("scenario parse error: {0}")]
    ScenarioParse(String),
    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
