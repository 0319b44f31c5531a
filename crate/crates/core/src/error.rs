use std::fmt;

use crate::netspec::{BasisMode, FamilyKind};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The document does not match the expected JSON shape.
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    /// The document parsed but violates one or more structural invariants.
    #[error("invalid network description:\n{}", Violations(.0))]
    Validation(Vec<String>),

    #[error("{mode} basis evaluation has no cost model for {family} edges")]
    UnsupportedMode { family: FamilyKind, mode: BasisMode },

    #[error("{what} is only defined for {expected} layers, got {found}")]
    UnsupportedFamily {
        what: &'static str,
        expected: FamilyKind,
        found: FamilyKind,
    },

    #[error("basis index {index} out of range (0..{count})")]
    BasisIndex { index: usize, count: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("lookup table for {family} exceeds the interpolation bound: max error {max_error:e} > {bound:e}")]
    LutAccuracy {
        family: FamilyKind,
        max_error: f64,
        bound: f64,
    },

    #[error("invalid width template `{template}`: {reason}")]
    Template { template: String, reason: String },

    #[error("invalid width range [{min}, {max}]")]
    Range { min: usize, max: usize },

    #[error("{0}")]
    Parse(String),

    /// A numeric argument outside its accepted range.
    #[error("{0}")]
    Argument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

struct Violations<'a>(&'a [String]);

impl fmt::Display for Violations<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {v}")?;
        }
        Ok(())
    }
}
