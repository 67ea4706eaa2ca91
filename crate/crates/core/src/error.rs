use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the modelling pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    /// Malformed delimited text or an unparseable value. `row` is 1-based
    /// and counts data rows (the header, when present, is row 0).
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("unknown {kind} `{name}`")]
    Lookup { kind: &'static str, name: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Two situations grouped into one stage that cannot share a stage.
    #[error("invalid staging: {first} and {second} {reason}")]
    InvalidStaging {
        first: String,
        second: String,
        reason: String,
    },

    #[error("incomplete: {0}")]
    Incomplete(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("construction error: {0}")]
    Construction(String),

    /// A structured document that does not decode; `field` names the first
    /// offending field.
    #[error("format error in `{field}`: {message}")]
    Format { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyInput => "empty_input",
            Error::Parse { .. } => "parse",
            Error::Lookup { .. } => "lookup",
            Error::Validation(_) => "validation",
            Error::Domain(_) => "domain",
            Error::InvalidStaging { .. } => "invalid_staging",
            Error::Incomplete(_) => "incomplete",
            Error::Config(_) => "config",
            Error::Construction(_) => "construction",
            Error::Format { .. } => "format",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn lookup(kind: &'static str, name: impl Into<String>) -> Self {
        Error::Lookup {
            kind,
            name: name.into(),
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn format(field: impl Into<String>, message: impl ToString) -> Self {
        Error::Format {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
