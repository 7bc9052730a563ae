use thiserror::Error;

/// Library-wide error type. The CLI maps variants onto its exit-code contract.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid scenario or policy configuration. `path` names the offending
    /// field in the source document (e.g. `jobs[0].runtime.init_time`).
    #[error("configuration error at {path}: {message}")]
    Config { path: String, message: String },

    /// A trace file (or in-memory trace) violates the trace contract.
    #[error("corrupt trace at line {line}: {message}")]
    CorruptTrace { line: u64, message: String },

    /// A metric denominator was zero or a component was otherwise undefined.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Paired scenarios differ in more than the declared factor.
    #[error("invalid comparison: {0}")]
    InvalidComparison(String),

    /// Integer overflow in FLOP accounting.
    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn corrupt(line: u64, message: impl Into<String>) -> Self {
        Error::CorruptTrace {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
