use thiserror::Error;

use crate::point::Shape;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: Shape, found: Shape },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A numerical failure. `iter` carries the solver iteration when known.
    #[error("numerical failure{}: {msg}", iter.map(|t| format!(" at iteration {t}")).unwrap_or_default())]
    Numerical { iter: Option<u64>, msg: String },

    /// The problem does not expose an oracle the caller asked for.
    #[error("missing capability: {0}")]
    Capability(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported regime {regime} for {mode}; valid regimes for {mode}: {valid}")]
    UnsupportedRegime {
        regime: String,
        mode: String,
        valid: String,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical {
            iter: None,
            msg: msg.into(),
        }
    }

    /// Attach a solver iteration index to a numerical error.
    pub fn at_iter(self, t: u64) -> Self {
        match self {
            Error::Numerical { iter: None, msg } => Error::Numerical { iter: Some(t), msg },
            Error::NonFinite(what) => Error::Numerical {
                iter: Some(t),
                msg: format!("non-finite value in {what}"),
            },
            other => other,
        }
    }
}
