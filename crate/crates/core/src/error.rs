//! Error type shared by every module in the crate.
//!
//! The variants partition failures the way callers need to react to them:
//! bad caller input ([`Error::InvalidArgument`], [`Error::DimensionMismatch`],
//! [`Error::Unknown`]) versus genuine numeric breakdown at runtime
//! ([`Error::Numeric`], [`Error::Diverged`]). Numeric errors always name the
//! operation that failed so a front-end can surface "where" without a backtrace.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Vector/matrix shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A numeric routine failed beyond recovery; `op` names the operation.
    #[error("numeric failure in {op}: {detail}")]
    Numeric { op: &'static str, detail: String },

    /// A simulated state or chain iterate left the admissible region.
    #[error("divergence in {op} at step {step}: magnitude {magnitude:.3e} exceeds {limit:.1e}")]
    Diverged {
        op: &'static str,
        step: usize,
        magnitude: f64,
        limit: f64,
    },

    /// A name was not found in one of the registries.
    #[error("unknown {kind} `{name}` (available: {available})")]
    Unknown {
        kind: &'static str,
        name: String,
        available: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn numeric(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Numeric {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn unknown(kind: &'static str, name: &str, available: &[&str]) -> Self {
        Error::Unknown {
            kind,
            name: name.to_owned(),
            available: available.join(", "),
        }
    }

    /// True when the error indicates a numeric/runtime failure rather than
    /// bad input; front-ends map this distinction onto exit codes.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric { .. } | Error::Diverged { .. })
    }
}
