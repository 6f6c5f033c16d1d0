//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty detection set")]
    EmptyDetections,

    #[error("box {index}: {reason}")]
    InvalidBox { index: usize, reason: String },

    #[error("detection file: malformed syntax: {0}")]
    ParseSyntax(String),

    #[error("detection file: {0}")]
    ParseSchema(String),

    #[error("unsupported file version {found} (expected {expected})")]
    UnsupportedVersion { found: u64, expected: u64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("box {box_index} has no feasible model value within delta_u = {delta_u}")]
    InfeasibleRow { box_index: usize, delta_u: f64 },

    #[error("problem is infeasible")]
    Infeasible,

    #[error("solution violates constraint `{name}`")]
    ViolatedConstraint { name: String },

    #[error("instance too large for exhaustive enumeration ({centers} centers, limit {limit})")]
    TooLargeForEnumeration { centers: usize, limit: usize },

    #[error("logical-or chain needs at least two inputs, got {0}")]
    ChainTooShort(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
