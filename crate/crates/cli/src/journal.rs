//! Chain journal: line-delimited JSON, one record per committed block plus a
//! genesis record and explicit time advances.
//!
//! The journal is the single source of truth for the CLI's chain state: every
//! invocation replays it from genesis through the contract, re-executing each
//! recorded call and verifying that the receipts match what was recorded. A
//! hand-edited journal fails loudly instead of replaying into silent drift.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mudmarket_core::contract::{CallOutcome, ContractCall, Marketplace, Transition};
use mudmarket_core::ledger::{Address, Chain, GasSchedule, TxReceipt};

use crate::config::Config;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)] // records are built once and written out
pub enum JournalRecord {
    Genesis {
        accounts: usize,
        initial_balance_wei: u128,
        preset: String,
        gas_per_eth: u64,
        usd_per_eth: f64,
        rating_window: u64,
    },
    Time {
        now: u64,
    },
    Block {
        number: u64,
        timestamp: u64,
        sender: Address,
        call: ContractCall,
        receipt: TxReceipt,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        transitions: Vec<Transition>,
    },
}

fn corrupt(line: usize, message: impl std::fmt::Display) -> CliError {
    CliError::Journal(format!("corrupt journal at line {}: {message}", line + 1))
}

fn schedule_for(preset: &str, gas_per_eth: u64, usd_per_eth: f64) -> Result<GasSchedule> {
    let schedule = GasSchedule::preset(preset)
        .ok_or_else(|| CliError::Usage(format!("unknown gas preset `{preset}`")))?;
    Ok(schedule.with_rates(gas_per_eth, usd_per_eth)?)
}

/// Creates a fresh journal holding only the genesis record.
pub fn init(
    path: &Path,
    config: &Config,
    accounts: usize,
    initial_balance_wei: u128,
    force: bool,
) -> Result<Marketplace> {
    if path.exists() && !force {
        return Err(CliError::Journal(format!(
            "journal {} already exists (pass --force to overwrite)",
            path.display()
        )));
    }
    let record = JournalRecord::Genesis {
        accounts,
        initial_balance_wei,
        preset: config.preset.clone(),
        gas_per_eth: config.gas_per_eth,
        usd_per_eth: config.usd_per_eth,
        rating_window: config.rating_window,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, format!("{}\n", serde_json::to_string(&record)?))?;
    let chain = Chain::genesis(accounts, initial_balance_wei)?;
    let schedule = schedule_for(&config.preset, config.gas_per_eth, config.usd_per_eth)?;
    Ok(Marketplace::with_rating_window(
        chain,
        schedule,
        config.rating_window,
    ))
}

/// Replays the journal from genesis and returns the reconstructed state.
pub fn load(path: &Path) -> Result<Marketplace> {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CliError::Journal(format!(
                "no journal at {} (run `mudmarket init` first)",
                path.display()
            )))
        }
        Err(e) => return Err(e.into()),
    };
    let mut market: Option<Marketplace> = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: JournalRecord = serde_json::from_str(line).map_err(|e| corrupt(i, e))?;
        match (record, &mut market) {
            (
                JournalRecord::Genesis {
                    accounts,
                    initial_balance_wei,
                    preset,
                    gas_per_eth,
                    usd_per_eth,
                    rating_window,
                },
                slot @ None,
            ) => {
                let chain = Chain::genesis(accounts, initial_balance_wei)?;
                let schedule = schedule_for(&preset, gas_per_eth, usd_per_eth)?;
                *slot = Some(Marketplace::with_rating_window(
                    chain,
                    schedule,
                    rating_window,
                ));
            }
            (JournalRecord::Genesis { .. }, Some(_)) => {
                return Err(corrupt(i, "second genesis record"));
            }
            (_, None) => return Err(corrupt(i, "journal does not start with genesis")),
            (JournalRecord::Time { now }, Some(market)) => {
                let current = market.chain().now();
                if now < current {
                    return Err(corrupt(i, "time goes backwards"));
                }
                market.advance_time(now - current);
            }
            (
                JournalRecord::Block {
                    number,
                    timestamp,
                    sender,
                    call,
                    receipt,
                    transitions,
                },
                Some(market),
            ) => {
                let current = market.chain().now();
                if timestamp < current {
                    return Err(corrupt(i, "block timestamp goes backwards"));
                }
                market.advance_time(timestamp - current);
                let outcome = market
                    .execute(sender, call)
                    .map_err(|e| corrupt(i, format!("replay rejected: {e}")))?;
                let got = outcome
                    .receipt()
                    .ok_or_else(|| corrupt(i, "recorded call committed no block"))?;
                if *got != receipt || got.block_number != number {
                    return Err(corrupt(i, "recorded receipt does not match replay"));
                }
                if let CallOutcome::Swept {
                    transitions: got_transitions,
                    ..
                } = &outcome
                {
                    if *got_transitions != transitions {
                        return Err(corrupt(i, "recorded transitions do not match replay"));
                    }
                }
            }
        }
    }
    market.ok_or_else(|| CliError::Journal(format!("journal {} is empty", path.display())))
}

pub fn append(path: &Path, record: &JournalRecord) -> Result<()> {
    let mut file = OpenOptions::new().append(true).open(path)?;
    writeln!(file, "{}", serde_json::to_string(record)?)?;
    Ok(())
}

/// Builds the block record for a committed call.
pub fn block_record(
    sender: Address,
    call: ContractCall,
    outcome: &CallOutcome,
    timestamp: u64,
) -> Option<JournalRecord> {
    let receipt = outcome.receipt()?.clone();
    let transitions = match outcome {
        CallOutcome::Swept { transitions, .. } => transitions.clone(),
        _ => Vec::new(),
    };
    Some(JournalRecord::Block {
        number: receipt.block_number,
        timestamp,
        sender,
        call,
        receipt,
        transitions,
    })
}

/// Exclusive lock guarding state-changing commands. Read-only invocations
/// never take it.
pub struct JournalLock {
    path: PathBuf,
}

impl JournalLock {
    pub fn acquire(journal: &Path) -> Result<Self> {
        let path = PathBuf::from(format!("{}.lock", journal.display()));
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CliError::Journal(format!(
                    "journal is locked by {} (remove it if stale)",
                    path.display()
                )))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for JournalLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mudmarket_core::contract::DeviceSpec;
    use mudmarket_core::ledger::WEI_PER_ETH;

    fn request_call() -> ContractCall {
        ContractCall::Request {
            device: DeviceSpec::new("Amazon", "Echo", "", "", None).unwrap(),
            budget: 2 * WEI_PER_ETH,
            deadline: 3600,
        }
    }

    #[test]
    fn journal_round_trips_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.journal");
        let config = Config::default();
        let mut market = init(&path, &config, 10, 100 * WEI_PER_ETH, false).unwrap();

        let sender = market.chain().accounts()[0].address;
        market.advance_time(50);
        append(&path, &JournalRecord::Time { now: 50 }).unwrap();
        let call = request_call();
        let outcome = market.execute(sender, call.clone()).unwrap();
        append(&path, &block_record(sender, call, &outcome, 50).unwrap()).unwrap();

        let replayed = load(&path).unwrap();
        assert_eq!(replayed, market);
        assert_eq!(replayed.chain().now(), 50);
        assert_eq!(replayed.open_requests().len(), 1);
    }

    #[test]
    fn tampered_receipts_fail_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.journal");
        let config = Config::default();
        let mut market = init(&path, &config, 10, 100 * WEI_PER_ETH, false).unwrap();
        let sender = market.chain().accounts()[0].address;
        let call = request_call();
        let outcome = market.execute(sender, call.clone()).unwrap();
        append(&path, &block_record(sender, call, &outcome, 0).unwrap()).unwrap();

        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("736408", "736409");
        fs::write(&path, text).unwrap();
        let err = load(&path).unwrap_err();
        assert!(matches!(err, CliError::Journal(_)), "{err}");
    }

    #[test]
    fn init_refuses_to_clobber_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.journal");
        let config = Config::default();
        init(&path, &config, 10, WEI_PER_ETH, false).unwrap();
        assert!(init(&path, &config, 10, WEI_PER_ETH, false).is_err());
        init(&path, &config, 10, WEI_PER_ETH, true).unwrap();
    }

    #[test]
    fn lock_is_exclusive_and_released_on_drop() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.journal");
        let lock = JournalLock::acquire(&path).unwrap();
        assert!(JournalLock::acquire(&path).is_err());
        drop(lock);
        JournalLock::acquire(&path).unwrap();
    }

    #[test]
    fn missing_journal_reports_init_hint() {
        let err = load(Path::new("/nonexistent/chain.journal")).unwrap_err();
        assert!(err.to_string().contains("mudmarket init"));
    }
}
