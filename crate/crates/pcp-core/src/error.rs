use thiserror::Error;

/// Errors surfaced by the library. `Validation` and `Parse` map to CLI exit
/// code 1, data-shaped errors (`Gap`, `Alignment`, `InsufficientHistory`,
/// `Io`) to exit code 2.
#[derive(Debug, Error)]
pub enum PcpError {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("hourly series has gaps; missing timestamps: {}", missing.join(", "))]
    Gap { missing: Vec<String> },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("insufficient history: need at least {need} hours, got {got}")]
    InsufficientHistory { need: usize, got: usize },

    #[error("argument out of range: {0}")]
    Range(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PcpError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        PcpError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, PcpError>;
