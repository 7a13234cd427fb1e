use alloc::string::String;
use alloc::vec::Vec;

/// Errors produced by the certification core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: left is {left:?}, right is {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("{what} has {len} entries but its shape requires {expected}")]
    BadLength {
        what: &'static str,
        len: usize,
        expected: usize,
    },

    #[error("{what} contains a non-finite entry at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error(
        "power iteration did not converge after {iterations} iterations \
         (estimate {estimate}, residual {residual})"
    )]
    NotConverged {
        iterations: usize,
        estimate: f64,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("unsupported architecture: {0}")]
    UnsupportedArchitecture(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("oracle input dimension {dim} exceeds the supported maximum of {max}")]
    OracleDimension { dim: usize, max: usize },

    #[error("alternating projections did not converge for pattern {pattern:#x} (gap {gap})")]
    ProjectionNotConverged { pattern: u64, gap: f64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
