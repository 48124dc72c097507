use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed arguments that do not fit together (mismatched feature
    /// tables, undeclared classes, ill-typed paths).
    #[error("usage error: {0}")]
    Usage(String),

    /// An input document violates its schema or cross-references.
    #[error("schema error: {0}")]
    Schema(String),

    /// The learned formula mis-evaluates a row of its own training set.
    /// Happens only for non-monotonic datasets (or ones lacking the features
    /// needed to separate rows).
    #[error("learned formula is not valid for row {row} ({provenance}); dataset is not monotonic or lacks distinguishing features")]
    NonMonotonicOrInsufficientFeatures { row: usize, provenance: String },

    /// A mined policy does not grant exactly the input authorizations.
    #[error("policy is inconsistent with the ACL: {0}")]
    Inconsistent(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonMonotonicOrInsufficientFeatures { .. } | Error::Inconsistent(_) => 3,
            _ => 2,
        }
    }
}
