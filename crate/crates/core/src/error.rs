use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infinite mass on ({lo}, {hi}]; choose a lower cutoff z_lo > {min_lo}")]
    InfiniteMass { lo: f64, hi: f64, min_lo: f64 },
    #[error("unsupported regime: {0}")]
    Unsupported(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("shell n={requested} lies beyond the available radius; max admissible n is {max}")]
    ShellOutOfRange { requested: u32, max: u32 },
    #[error("input mismatch: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
