//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by parsing, generation, and pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    /// A malformed line in an event stream.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An event coordinate outside the declared sensor resolution.
    #[error("geometry error at line {line}: pixel ({x},{y}) outside {width}x{height}")]
    Geometry {
        line: usize,
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },

    /// Timestamps going backwards within a stream.
    #[error("ordering error: timestamp {t} after {prev} (event index {index})")]
    Ordering { index: usize, prev: u64, t: u64 },

    /// Invalid parameter value.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Invalid or incomplete configuration.
    #[error("missing field: {0}")]
    MissingField(String),

    /// Configuration value that does not parse or is out of range.
    #[error("config error: {0}")]
    Config(String),

    /// Synthetic scene that cannot be generated.
    #[error("generation error: {0}")]
    Generation(String),

    /// Flow file with a bad magic tag or truncated payload.
    #[error("flow file error: {0}")]
    FlowFormat(String),

    /// Mismatched grid dimensions between two operands.
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    /// A metric whose evaluation set is empty.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Oracle input above the allowed budget.
    #[error("oracle budget exceeded: {0}")]
    BudgetExceeded(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// PNG encode/decode failure.
    #[error("image error: {0}")]
    Image(String),
}

pub type Result<T> = std::result::Result<T, Error>;
