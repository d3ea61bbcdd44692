use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the domain of the operation (non-positive mass, zero frequency, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller supplied inconsistent or malformed input.
    #[error("usage error: {0}")]
    Usage(String),

    /// A token that could not be parsed as a quantity or config entry.
    #[error("cannot parse `{token}`: {reason}")]
    Parse { token: String, reason: String },

    #[error("integration produced a non-finite state after t = {last_valid_t} s")]
    Integration { last_valid_t: f64 },

    #[error("potential is singular at r = 0")]
    Singular,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(token: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            token: token.into(),
            reason: reason.into(),
        }
    }
}
