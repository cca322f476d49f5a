use thiserror::Error;

/// Failures mapped to process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Verification(String),
    #[error(transparent)]
    Core(#[from] ddmpc::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Infeasible(_) => 2,
            Self::Verification(_) => 3,
            Self::Config(_) | Self::Io(_) => 4,
            Self::Core(e) => match e {
                ddmpc::Error::InitialInfeasible { .. }
                | ddmpc::Error::RecursiveFeasibility { .. }
                | ddmpc::Error::NumericalFailure { .. } => 2,
                _ => 4,
            },
        }
    }
}

pub fn io_err(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
