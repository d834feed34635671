use std::fmt;

/// Errors raised by the library.
///
/// Data-quality problems found by [`crate::dataset::validate`] are not errors;
/// they are returned as a [`crate::dataset::ValidationReport`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("impossible evidence: every DI level has zero posterior mass")]
    ImpossibleEvidence,

    #[error("illegal transition: event `{event}` is not allowed in state {state}")]
    State { state: String, event: String },

    #[error("policy violation: {0}")]
    Policy(String),

    #[error("event log record {index}: {source}")]
    Replay {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn schema(location: impl fmt::Display, message: impl fmt::Display) -> Self {
        Error::Schema {
            location: location.to_string(),
            message: message.to_string(),
        }
    }

    /// Stable machine-readable code, used in problem documents.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Schema { .. } => "schema",
            Error::Argument(_) => "argument",
            Error::UndefinedMetric(_) => "undefined-metric",
            Error::Configuration(_) => "configuration",
            Error::InsufficientData(_) => "insufficient-data",
            Error::ImpossibleEvidence => "impossible-evidence",
            Error::State { .. } => "state",
            Error::Policy(_) => "policy",
            Error::Replay { .. } => "replay",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
