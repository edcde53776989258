use std::path::PathBuf;

use spinboson::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    ConfigLine { path: PathBuf, line: usize, message: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Input data that does not follow a CSV schema.
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit status: 2 for configuration, 3 for numerical and 4 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ConfigLine { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } | CliError::Schema { .. } => 4,
            CliError::Core(e) => match e {
                CoreError::Domain(_) | CoreError::Config(_) | CoreError::Resource { .. } => 2,
                CoreError::Numerical(_) | CoreError::Shape(_) => 3,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_category() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(CoreError::Domain("x".into())).exit_code(), 2);
        assert_eq!(CliError::Core(CoreError::Resource { dim: 10, limit: 1 }).exit_code(), 2);
        assert_eq!(CliError::Core(CoreError::Numerical("x".into())).exit_code(), 3);
        assert_eq!(CliError::Numerical("x".into()).exit_code(), 3);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(CliError::io("a.csv", io).exit_code(), 4);
        assert_eq!(CliError::Schema { path: "a.csv".into(), message: "x".into() }.exit_code(), 4);
    }
}
