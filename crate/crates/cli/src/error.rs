use thiserror::Error;

/// Failure categories, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("config error: missing fields: {}", .0.join(", "))]
    Missing(Vec<String>),

    #[error("input error: {0}")]
    Input(String),

    #[error("computation error: {0}")]
    Compute(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Missing(_) => 3,
            CliError::Input(_) => 4,
            CliError::Compute(_) => 5,
            CliError::Io(_) => 6,
        }
    }
}

impl From<rimnull_core::Error> for CliError {
    fn from(e: rimnull_core::Error) -> Self {
        use rimnull_core::Error as E;
        match e {
            E::Config(m) => CliError::Config(m),
            E::Parse { .. } => CliError::Input(e.to_string()),
            E::Io(io) => CliError::Io(io),
            other => CliError::Compute(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
