use std::path::PathBuf;

/// Failure classes of a harness run; each maps to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("solver failure: {0}")]
    Solver(#[from] chebspike::Error),

    #[error("acceptance check failed: {0}")]
    Check(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema violation in {schema}: {message}")]
    Schema { schema: &'static str, message: String },
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Solver(_) => 3,
            CliError::Check(_) => 4,
            CliError::Io { .. } | CliError::Schema { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
