use thiserror::Error;
use vhi_core::VhiError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Solver(#[from] VhiError),
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_OTHER: u8 = 1;
pub const EXIT_ILL_POSED: u8 = 2;
pub const EXIT_NONCONVERGENCE: u8 = 3;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(VhiError::IllPosed(_)) => EXIT_ILL_POSED,
            CliError::Solver(e) if e.is_nonconvergence() => EXIT_NONCONVERGENCE,
            _ => EXIT_OTHER,
        }
    }
}
