use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unsupported regime: {0}")]
    Unsupported(String),
    #[error("verification failed: {0}")]
    VerifyFailed(String),
    #[error("{0}")]
    Core(levyheat::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<levyheat::Error> for CliError {
    fn from(e: levyheat::Error) -> Self {
        match e {
            levyheat::Error::Unsupported(msg) => CliError::Unsupported(msg),
            levyheat::Error::InvalidParameter(msg) => CliError::Config(msg),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Unsupported(_) => 2,
            CliError::VerifyFailed(_) => 3,
            CliError::Config(_) | CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }
}
