use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mudmarket_core::contract::DEFAULT_RATING_WINDOW;
use mudmarket_core::ledger::{DEFAULT_GAS_PER_ETH, DEFAULT_USD_PER_ETH};

use crate::error::{CliError, Result};

/// Runtime configuration: a TOML file with per-invocation flag overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Chain journal path.
    pub journal: PathBuf,
    /// Blob store root directory.
    pub store_root: PathBuf,
    /// Output directory for transcripts and reports.
    pub out_dir: PathBuf,
    /// Gas preset: `paper` or `linear`.
    pub preset: String,
    pub gas_per_eth: u64,
    pub usd_per_eth: f64,
    /// Built-in rating window in seconds.
    pub rating_window: u64,
    /// Default seed for scenario randomness.
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            journal: PathBuf::from("mudmarket.journal"),
            store_root: PathBuf::from("mudstore"),
            out_dir: PathBuf::from("out"),
            preset: "paper".into(),
            gas_per_eth: DEFAULT_GAS_PER_ETH,
            usd_per_eth: DEFAULT_USD_PER_ETH,
            rating_window: DEFAULT_RATING_WINDOW,
            seed: 7,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: Config = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.preset != "paper" && self.preset != "linear" {
            return Err(CliError::Usage(format!(
                "preset must be `paper` or `linear`, got `{}`",
                self.preset
            )));
        }
        if self.gas_per_eth == 0 {
            return Err(CliError::Usage("gas_per_eth must be positive".into()));
        }
        Ok(())
    }
}
