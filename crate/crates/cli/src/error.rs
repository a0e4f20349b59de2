use mudmarket_core::contract::ContractError;
use mudmarket_core::ledger::LedgerError;
use mudmarket_core::mudfile::MudError;
use mudmarket_core::offstore::StoreError;
use mudmarket_core::scenario::{ScenarioError, UnknownScenario};

/// One error type for the whole binary. Usage problems exit 2, domain
/// rejections and environment failures exit 1; either way stderr carries a
/// single `error: <kind>: <message>` line.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Contract(#[from] ContractError),
    #[error("{0}")]
    Ledger(#[from] LedgerError),
    #[error("{0}")]
    Store(#[from] StoreError),
    #[error("{0}")]
    Mud(#[from] MudError),
    #[error("{0}")]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    UnknownScenario(#[from] UnknownScenario),
    #[error("{0}")]
    Journal(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Contract(_) => "contract",
            CliError::Ledger(_) => "ledger",
            CliError::Store(_) => "store",
            CliError::Mud(_) => "mud",
            CliError::Scenario(_) | CliError::UnknownScenario(_) => "scenario",
            CliError::Journal(_) => "journal",
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
