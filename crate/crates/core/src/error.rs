use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no legal moves")]
    NoLegalMoves,
    #[error("argument error: {0}")]
    Argument(String),
    #[error("mode error: {0}")]
    Mode(String),
    #[error("rule error: {0}")]
    Rule(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("position {index}: {source}")]
    Position {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Strips any [`Error::Position`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Position { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
