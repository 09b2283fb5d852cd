use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Numeric {
        context: String,
        #[source]
        source: catsim::Error,
    },

    #[error("I/O error at {}: {message}", path.display())]
    Io { path: PathBuf, message: String },

    /// An upstream stage has not been run in this output directory.
    #[error("missing input {}: run `{stage}` first", path.display())]
    MissingInput { stage: &'static str, path: PathBuf },

    #[error("checksum verification failed for {} file(s): {}", .0.len(), .0.join(", "))]
    Integrity(Vec<String>),

    #[error("{failed} acceptance criteria failed")]
    CriteriaFailed { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric { .. } => 3,
            CliError::Io { .. } => 4,
            CliError::MissingInput { .. } => 5,
            CliError::Integrity(_) => 6,
            CliError::CriteriaFailed { .. } => 7,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// Wraps a library error; parse and schema failures count as bad input,
    /// file failures as I/O, everything else as numeric.
    pub(crate) fn lib(context: impl Into<String>, source: catsim::Error) -> Self {
        let context = context.into();
        match source {
            catsim::Error::Parse { .. } | catsim::Error::Schema(_) => {
                CliError::Config(format!("{context}: {source}"))
            }
            catsim::Error::Io(e) => CliError::Io {
                path: PathBuf::from(context),
                message: e.to_string(),
            },
            catsim::Error::Json(e) => CliError::Io {
                path: PathBuf::from(context),
                message: e.to_string(),
            },
            source => CliError::Numeric { context, source },
        }
    }
}
