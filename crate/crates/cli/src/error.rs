use soliton_core::Error as CoreError;
use std::process::ExitCode;
use thiserror::Error;

pub const EXIT_CHECK_FAILED: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_INFEASIBLE: u8 = 65;
pub const EXIT_IO: u8 = 74;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::InvalidGrid(_)
            | CoreError::InvalidParameter(_)
            | CoreError::OutOfDomain { .. }
            | CoreError::GridMismatch { .. } => CliError::Usage(msg),
            CoreError::UnderResolved(_)
            | CoreError::NearCritical(_)
            | CoreError::NotCritical(_)
            | CoreError::DegenerateDenominator(_)
            | CoreError::NoEigenvalue(_) => CliError::Infeasible(msg),
            CoreError::CountMismatch { .. } | CoreError::PhaseJump { .. } | CoreError::RootFinding(_) => {
                CliError::CheckFailed(msg)
            }
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => EXIT_IO,
        })
    }
}
