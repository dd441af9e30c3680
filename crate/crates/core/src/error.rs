use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("correlation matrix is not positive definite (failing pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("index {index} out of range for universe of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("portfolios overlap on company index {index}")]
    OverlappingPortfolios { index: usize },

    #[error("zero variance: correlation is undefined")]
    ZeroVariance,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("universe too small: need {needed} tickers, have {available}")]
    InsufficientUniverse { needed: usize, available: usize },

    #[error("malformed CSV at line {line}: {message}")]
    MalformedCsv { line: u64, message: String },

    #[error("non-positive price for {ticker} on {date}")]
    NonPositivePrice { ticker: String, date: String },

    #[error("ticker {ticker} has {observations} observations, {required} required")]
    TooShortHistory { ticker: String, observations: usize, required: usize },

    #[error("window starting at {start} does not fit a panel of {len} returns")]
    WindowOutOfRange { start: usize, len: usize },

    #[error("no usable portfolio pairs: every pair had zero loss variance")]
    NoUsablePairs,

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }
}
