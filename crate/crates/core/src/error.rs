use thiserror::Error;

/// Errors raised by the analysis, mechanism and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside its documented domain.
    #[error("invalid {name}: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A point could not be placed on the unit sphere (zero or non-finite vector).
    #[error("degenerate point ({x}, {y}, {z}): {reason}")]
    DegeneratePoint {
        x: f64,
        y: f64,
        z: f64,
        reason: &'static str,
    },

    /// The noise would push the uploaded error outside [0, pi], which an
    /// attacker can detect.
    #[error("noise {noise} out of range [{min}, {max}] for error {error}")]
    NoiseOutOfRange {
        error: f64,
        noise: f64,
        min: f64,
        max: f64,
    },

    #[error("unknown {what} `{name}`")]
    UnknownName { what: &'static str, name: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("malformed trace (user {user_id}, video {video_id}): {reason}")]
    MalformedTrace {
        user_id: u32,
        video_id: u32,
        reason: String,
    },

    /// Schema violation while reading a CSV file. `row` is 1-based and
    /// counts data rows (the header is row 0).
    #[error("row {row}, column `{column}`: {reason}")]
    Schema {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }

    /// Wraps the error with a human readable context string.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, with all context layers stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
