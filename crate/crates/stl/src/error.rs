use thiserror::Error;

pub type Result<T> = std::result::Result<T, StlError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StlError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown operator `{op}` at {line}:{column}")]
    UnknownOperator {
        line: usize,
        column: usize,
        op: String,
    },

    #[error("malformed interval at {line}:{column}: {message}")]
    Interval {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("channel `{0}` is not present in the trace")]
    MissingChannel(String),

    #[error("time index {t} is outside a trace of length {len}")]
    IndexOutOfRange { t: usize, len: usize },

    #[error("evaluation error at step {t}: {message}")]
    Domain { t: usize, message: String },

    #[error("empty temporal window: [{from}, ..] starts beyond the last step {last}")]
    EmptyWindow { from: usize, last: usize },

    #[error("invalid trace: {0}")]
    Trace(String),

    #[error("trace csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for StlError {
    fn from(err: csv::Error) -> Self {
        StlError::Csv(err.to_string())
    }
}
