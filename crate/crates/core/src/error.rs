use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("needs at least two studies (got {0})")]
    InsufficientStudies(usize),

    #[error("studies mix effect measures ({0} and {1})")]
    MixedMeasures(&'static str, &'static str),

    /// A study file row could not be turned into a study effect.
    /// `row` is the 1-based line number in the source (the CSV header is line 1,
    /// the first JSON array element is row 1).
    #[error("row {row}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// Malformed input that is not attributable to a single row.
    #[error("format error: {0}")]
    Format(String),

    #[error("no accepted replicates after {draws_used} draws")]
    NoAcceptedReplicates { draws_used: u64 },

    #[error("render error: {0}")]
    Render(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(row: usize, column: &str, message: impl Into<String>) -> Self {
        Error::Parse {
            row,
            column: column.to_string(),
            message: message.into(),
        }
    }
}
