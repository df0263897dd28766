use std::fmt;

/// Harness failures, each mapped to a process exit code.
#[derive(Debug)]
pub enum HarnessError {
    /// Bad configuration or arguments (exit 2).
    Config(String),
    /// Numerical failure inside a solver (exit 3).
    Numerical(String),
    /// File-system or serialization failure (exit 4).
    Io(String),
    /// A check ran but did not pass: rate outside band, failed sweep cell (exit 1).
    Failed(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Failed(_) => 1,
            HarnessError::Config(_) => 2,
            HarnessError::Numerical(_) => 3,
            HarnessError::Io(_) => 4,
        }
    }
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(m) => write!(f, "configuration error: {m}"),
            HarnessError::Numerical(m) => write!(f, "{m}"),
            HarnessError::Io(m) => write!(f, "I/O error: {m}"),
            HarnessError::Failed(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<dsmooth::Error> for HarnessError {
    fn from(e: dsmooth::Error) -> Self {
        use dsmooth::Error as E;
        match e {
            E::Numerical { .. } | E::NonFinite(_) => HarnessError::Numerical(e.to_string()),
            E::Io(_) => HarnessError::Io(e.to_string()),
            _ => HarnessError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
