//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An operation received an empty vector or matrix where data is required.
    #[error("empty input")]
    EmptyInput,

    /// Operand shapes are incompatible.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Point clouds live in different ambient dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A parameter is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Sinkhorn scaling vectors left the representable range.
    #[error("numerical blow-up, increase blur")]
    NumericalBlowUp,

    /// A loss or metric produced a non-finite value; names the component.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// The brute-force transport solver only accepts tiny instances.
    #[error("oracle restricted to tiny instances (n, m <= {0})")]
    OracleTooLarge(usize),

    /// A metric is undefined on the given records.
    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    /// Degenerate clustering input (single cluster, zero separation, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics themselves (as opposed to bad
    /// usage or I/O); the CLI maps these to exit code 2.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalBlowUp | Error::NonFinite(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
