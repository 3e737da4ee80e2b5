//! Error type of the command-line front end.

use std::path::PathBuf;

/// Errors raised by file handling and the command-line front end.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A file could not be opened, read or written.
    #[error("{path}: {source}")]
    Io {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// Malformed CSV input.
    #[error("{path}: {message}")]
    Csv {
        /// Offending path.
        path: PathBuf,
        /// What went wrong, with row and column where known.
        message: String,
    },
    /// Malformed JSON input.
    #[error("{path}: {source}")]
    Json {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        source: serde_json::Error,
    },
    /// Inputs that do not fit together (sizes, dimensions, methods).
    #[error("{0}")]
    Invalid(String),
    /// Error from the numerical core.
    #[error(transparent)]
    Core(#[from] pglearn_core::Error),
}

impl CliError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        use pglearn_core::Error as E;
        match self {
            CliError::Io { .. } => "io",
            CliError::Csv { .. } => "csv",
            CliError::Json { .. } => "json",
            CliError::Invalid(_) => "invalid_input",
            CliError::Core(e) => match e {
                E::InvalidData(_) => "invalid_data",
                E::InvalidParameter(_) => "invalid_parameter",
                E::InfeasibleSplit(_) => "infeasible_split",
                E::DegenerateValidation => "degenerate_validation",
                E::NonFinite(_) => "non_finite",
                E::AllDiverged(_) => "all_diverged",
                E::Internal(_) => "internal",
            },
        }
    }

    /// One-line JSON object `{"error": kind, "message": text}`.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        CliError::Json { path: path.into(), source }
    }
}

/// Result alias for this crate.
pub type Result<T> = std::result::Result<T, CliError>;
