use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cannot parse number {0:?}")]
    Parse(String),

    #[error("enumeration needs {count} allocations, limit is {limit}")]
    Blowup { count: u128, limit: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("candidate was not verified: {0}")]
    Unverified(String),

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(text: &str) -> Self {
        Error::Parse(text.to_string())
    }
}
