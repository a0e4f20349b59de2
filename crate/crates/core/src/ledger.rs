//! Deterministic single-chain ledger: accounts, wei balances, timestamped
//! blocks, transaction application, and gas-fee accounting.
//!
//! All value arithmetic is integer wei so conservation is exactly checkable;
//! ETH and USD figures are derived only when rendering reports. Time is a
//! manually advanced logical clock, and every committed transaction occupies
//! its own block.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::hexid::{self, ParseIdError};

/// Wei per Ether.
pub const WEI_PER_ETH: u128 = 1_000_000_000_000_000_000;

/// Default gas-to-Ether conversion rate: 4.3e7 gas = 1 ETH.
pub const DEFAULT_GAS_PER_ETH: u64 = 43_000_000;

/// Default USD price of one Ether used in cost reports.
pub const DEFAULT_USD_PER_ETH: f64 = 1633.0;

/// 20-byte account identifier, rendered as 40 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address([u8; 20]);

impl Address {
    pub fn from_bytes(bytes: [u8; 20]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({self})")
    }
}

impl FromStr for Address {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        hexid::parse_fixed::<20>("address", s).map(Self)
    }
}

impl Serialize for Address {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ledger-visible function names. The first five are the fee-bearing contract
/// calls; `expire` is the zero-gas maintenance sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Function {
    Request,
    Offer,
    Select,
    Submit,
    Rate,
    Expire,
}

impl Function {
    /// The five contract functions, in protocol order.
    pub const CONTRACT: [Function; 5] = [
        Function::Request,
        Function::Offer,
        Function::Select,
        Function::Submit,
        Function::Rate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Request => "request",
            Function::Offer => "offer",
            Function::Select => "select",
            Function::Submit => "submit",
            Function::Rate => "rate",
            Function::Expire => "expire",
        }
    }
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Single account: address plus balance in wei.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub address: Address,
    pub balance: u128,
}

/// Receipt of one committed transaction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxReceipt {
    pub sender: Address,
    pub function: Function,
    /// Byte length of the canonical serialization of the call's arguments.
    pub payload_bytes: u64,
    pub gas_used: u64,
    pub fee_wei: u128,
    pub block_number: u64,
}

/// One block. Numbers increase by exactly 1, timestamps never decrease.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub number: u64,
    pub timestamp: u64,
    pub transactions: Vec<TxReceipt>,
}

/// How gas is assigned to a call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GasModel {
    /// Fixed cost per function. Functions absent from the table cost zero.
    PerFunction { gas: BTreeMap<Function, u64> },
    /// Affine cost in the payload size: `base + per_byte * payload_bytes`.
    Linear { base: u64, per_byte: u64 },
}

/// Gas pricing: a gas model plus the conversion rates used for fee and cost
/// figures. Wei fees use floor division; ETH/USD values appear only in
/// reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasSchedule {
    pub model: GasModel,
    pub gas_per_eth: u64,
    pub usd_per_eth: f64,
}

impl GasSchedule {
    /// Builds a schedule, rejecting invalid rates and per-function tables that
    /// are missing any of the five contract functions.
    pub fn new(model: GasModel, gas_per_eth: u64, usd_per_eth: f64) -> Result<Self, LedgerError> {
        if gas_per_eth == 0 {
            return Err(LedgerError::Config("gas_per_eth must be positive".into()));
        }
        if usd_per_eth.is_nan() || usd_per_eth < 0.0 {
            return Err(LedgerError::Config(
                "usd_per_eth must be non-negative".into(),
            ));
        }
        if let GasModel::PerFunction { gas } = &model {
            for function in Function::CONTRACT {
                if !gas.contains_key(&function) {
                    return Err(LedgerError::Config(format!(
                        "per-function gas table is missing `{function}`"
                    )));
                }
            }
        }
        Ok(Self {
            model,
            gas_per_eth,
            usd_per_eth,
        })
    }

    /// The `paper` preset: fixed per-function gas as measured on the reference
    /// Ethereum deployment, at 4.3e7 gas = 1 ETH = 1633 USD.
    pub fn paper() -> Self {
        let gas = [
            (Function::Request, 736_408),
            (Function::Offer, 199_358),
            (Function::Select, 173_681),
            (Function::Submit, 218_216),
            (Function::Rate, 140_474),
            (Function::Expire, 0),
        ]
        .into_iter()
        .collect();
        Self {
            model: GasModel::PerFunction { gas },
            gas_per_eth: DEFAULT_GAS_PER_ETH,
            usd_per_eth: DEFAULT_USD_PER_ETH,
        }
    }

    /// The `linear` preset: intrinsic base cost plus a per-byte charge on the
    /// canonical payload.
    pub fn linear() -> Self {
        Self {
            model: GasModel::Linear {
                base: 21_000,
                per_byte: 68,
            },
            gas_per_eth: DEFAULT_GAS_PER_ETH,
            usd_per_eth: DEFAULT_USD_PER_ETH,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "paper" => Some(Self::paper()),
            "linear" => Some(Self::linear()),
            _ => None,
        }
    }

    /// Replaces the conversion rates, keeping the gas model.
    pub fn with_rates(self, gas_per_eth: u64, usd_per_eth: f64) -> Result<Self, LedgerError> {
        Self::new(self.model, gas_per_eth, usd_per_eth)
    }

    pub fn gas_for(&self, function: Function, payload_bytes: u64) -> u64 {
        match &self.model {
            GasModel::PerFunction { gas } => gas.get(&function).copied().unwrap_or(0),
            GasModel::Linear { base, per_byte } => {
                if function == Function::Expire {
                    0
                } else {
                    base + per_byte * payload_bytes
                }
            }
        }
    }

    /// Fee in wei for a gas amount: `gas * 1e18 / gas_per_eth`, floored.
    pub fn fee_wei(&self, gas_used: u64) -> u128 {
        gas_used as u128 * WEI_PER_ETH / self.gas_per_eth as u128
    }
}

/// Fee in ETH and cost in USD for a gas amount, as rendered in reports.
pub fn fee_report(gas_used: u64, schedule: &GasSchedule) -> (f64, f64) {
    let fee_eth = gas_used as f64 / schedule.gas_per_eth as f64;
    (fee_eth, fee_eth * schedule.usd_per_eth)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LedgerError {
    /// Invalid genesis or schedule configuration.
    Config(String),
    UnknownAccount(Address),
    InsufficientFunds {
        address: Address,
        needed: u128,
        available: u128,
    },
}

impl fmt::Display for LedgerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LedgerError::Config(msg) => write!(f, "configuration error: {msg}"),
            LedgerError::UnknownAccount(address) => write!(f, "unknown account {address}"),
            LedgerError::InsufficientFunds {
                address,
                needed,
                available,
            } => write!(
                f,
                "insufficient funds: account {address} needs {needed} wei but holds {available}"
            ),
        }
    }
}

impl core::error::Error for LedgerError {}

/// The simulated chain. After every committed transaction, the sum of all
/// account balances, the fee sink, and any contract-held escrow equals the
/// genesis supply exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chain {
    blocks: Vec<Block>,
    accounts: Vec<Account>,
    index: BTreeMap<Address, usize>,
    fee_sink: Account,
    now: u64,
    initial_balance: u128,
}

fn account_address(i: usize) -> Address {
    let mut hasher = Sha256::new();
    hasher.update(b"mudmarket:account:");
    hasher.update((i as u64).to_be_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 20];
    bytes.copy_from_slice(&digest[..20]);
    Address::from_bytes(bytes)
}

fn fee_sink_address() -> Address {
    let digest = Sha256::digest(b"mudmarket:fee-sink");
    let mut bytes = [0u8; 20];
    bytes.copy_from_slice(&digest[..20]);
    Address::from_bytes(bytes)
}

impl Chain {
    /// Creates a chain with one empty genesis block at timestamp 0 and
    /// `n_accounts` accounts each holding `initial_balance` wei.
    pub fn genesis(n_accounts: usize, initial_balance: u128) -> Result<Self, LedgerError> {
        if n_accounts < 2 {
            return Err(LedgerError::Config(
                "genesis needs at least two accounts".into(),
            ));
        }
        let accounts: Vec<Account> = (0..n_accounts)
            .map(|i| Account {
                address: account_address(i),
                balance: initial_balance,
            })
            .collect();
        let index = accounts
            .iter()
            .enumerate()
            .map(|(i, account)| (account.address, i))
            .collect();
        Ok(Self {
            blocks: vec![Block {
                number: 0,
                timestamp: 0,
                transactions: Vec::new(),
            }],
            accounts,
            index,
            fee_sink: Account {
                address: fee_sink_address(),
                balance: 0,
            },
            now: 0,
            initial_balance,
        })
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Height of the chain tip (the genesis block is height 0).
    pub fn height(&self) -> u64 {
        self.blocks.len() as u64 - 1
    }

    /// Moves the logical clock forward; new blocks carry the new timestamp.
    pub fn advance_time(&mut self, seconds: u64) {
        self.now = self.now.saturating_add(seconds);
    }

    pub fn accounts(&self) -> &[Account] {
        &self.accounts
    }

    pub fn fee_sink(&self) -> &Account {
        &self.fee_sink
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn has_account(&self, address: Address) -> bool {
        self.index.contains_key(&address)
    }

    pub fn balance(&self, address: Address) -> Result<u128, LedgerError> {
        self.index
            .get(&address)
            .map(|&i| self.accounts[i].balance)
            .ok_or(LedgerError::UnknownAccount(address))
    }

    /// Total wei created at genesis.
    pub fn genesis_supply(&self) -> u128 {
        self.accounts.len() as u128 * self.initial_balance
    }

    /// Sum of all account balances plus the fee sink. Contract escrow is held
    /// outside the accounts, so conservation reads
    /// `total_account_wei() + escrow == genesis_supply()`.
    pub fn total_account_wei(&self) -> u128 {
        self.accounts.iter().map(|a| a.balance).sum::<u128>() + self.fee_sink.balance
    }

    /// Commits one transaction in a fresh block: charges the gas fee from the
    /// sender to the fee sink and appends the receipt. Rejected transactions
    /// leave the chain untouched.
    pub fn apply_tx(
        &mut self,
        sender: Address,
        function: Function,
        payload_bytes: u64,
        schedule: &GasSchedule,
    ) -> Result<TxReceipt, LedgerError> {
        let available = self.balance(sender)?;
        let gas_used = schedule.gas_for(function, payload_bytes);
        let fee_wei = schedule.fee_wei(gas_used);
        if available < fee_wei {
            return Err(LedgerError::InsufficientFunds {
                address: sender,
                needed: fee_wei,
                available,
            });
        }
        self.debit(sender, fee_wei).expect("balance checked above");
        self.fee_sink.balance += fee_wei;
        let receipt = TxReceipt {
            sender,
            function,
            payload_bytes,
            gas_used,
            fee_wei,
            block_number: self.blocks.len() as u64,
        };
        self.blocks.push(Block {
            number: receipt.block_number,
            timestamp: self.now,
            transactions: vec![receipt.clone()],
        });
        Ok(receipt)
    }

    pub(crate) fn debit(&mut self, address: Address, amount: u128) -> Result<(), LedgerError> {
        let i = *self
            .index
            .get(&address)
            .ok_or(LedgerError::UnknownAccount(address))?;
        let balance = self.accounts[i].balance;
        if balance < amount {
            return Err(LedgerError::InsufficientFunds {
                address,
                needed: amount,
                available: balance,
            });
        }
        self.accounts[i].balance = balance - amount;
        Ok(())
    }

    pub(crate) fn credit(&mut self, address: Address, amount: u128) -> Result<(), LedgerError> {
        let i = *self
            .index
            .get(&address)
            .ok_or(LedgerError::UnknownAccount(address))?;
        self.accounts[i].balance += amount;
        Ok(())
    }
}
