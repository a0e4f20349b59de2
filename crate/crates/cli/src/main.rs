//! Command-line front door for the MUD data marketplace.
//!
//! State-changing commands replay the chain journal, execute one contract
//! call, and append the committed block; read commands leave the journal
//! byte-identical. Every flow here is expressible as library calls — the CLI
//! adds argument parsing, files, and printing, never business logic.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mudmarket_core::contract::{
    CallOutcome, ContractCall, DeviceSpec, Marketplace, Score, Transition, ViewQuery, ViewResult,
};
use mudmarket_core::ledger::{fee_report, Address, WEI_PER_ETH};
use mudmarket_core::market::{gas_report, render_gas_table, GasReport};
use mudmarket_core::mudfile::{self, QualityTier};
use mudmarket_core::offstore::{MudStore, StoreIndex};
use mudmarket_core::scenario::{run_all, run_scenario, ScenarioId, ScenarioReport};

use mudmarket_cli::config::Config;
use mudmarket_cli::error::{CliError, Result};
use mudmarket_cli::fsstore::FsStore;
use mudmarket_cli::journal::{self, JournalLock};

#[derive(Parser)]
#[command(
    name = "mudmarket",
    version,
    about = "Deterministic marketplace for exchanging IoT expected-behavior (MUD) profiles"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    /// Emit machine-readable JSON instead of human-readable text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// TOML config file; `./mudmarket.toml` is picked up when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Chain journal path.
    #[arg(long, global = true)]
    journal: Option<PathBuf>,
    /// Blob store root directory.
    #[arg(long, global = true)]
    store_root: Option<PathBuf>,
    /// Output directory for transcripts and reports.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Gas preset: paper or linear.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    gas_per_eth: Option<u64>,
    #[arg(long, global = true)]
    usd_per_eth: Option<f64>,
    /// Built-in rating window in seconds.
    #[arg(long, global = true)]
    rating_window: Option<u64>,
    /// Seed for scenario randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Create a fresh chain journal with funded accounts.
    Init {
        #[arg(long, default_value_t = 10)]
        accounts: usize,
        /// Initial balance per account, in ETH.
        #[arg(long, default_value = "100")]
        balance: String,
        #[arg(long)]
        force: bool,
    },
    /// Publish a MUD data request (consumer).
    Request {
        #[arg(long)]
        from: String,
        #[arg(long, default_value = "")]
        manufacturer: String,
        /// Device name.
        #[arg(long, default_value = "")]
        device: String,
        #[arg(long, default_value = "")]
        model: String,
        #[arg(long, default_value = "")]
        firmware: String,
        /// CPE 2.3 name.
        #[arg(long)]
        cpe: Option<String>,
        /// Advisory budget in ETH.
        #[arg(long)]
        budget: String,
        /// Absolute seconds, or +N relative to chain time.
        #[arg(long)]
        deadline: String,
    },
    /// Offer MUD data on an open request (supplier).
    Offer {
        #[arg(long)]
        from: String,
        #[arg(long)]
        uid: String,
        #[arg(long)]
        ace_count: u32,
        #[arg(long)]
        size_kb: f64,
        #[arg(long)]
        flow_scope: String,
        #[arg(long)]
        network_setting: String,
        /// Price in ETH.
        #[arg(long)]
        price: String,
        /// Absolute seconds, or +N relative to chain time.
        #[arg(long)]
        deadline: String,
    },
    /// Approve offers, escrowing their combined price (consumer).
    Select {
        #[arg(long)]
        from: String,
        #[arg(long)]
        uid: String,
        /// Comma-separated suppliers; empty closes the request unserved.
        #[arg(long, default_value = "")]
        suppliers: String,
    },
    /// Share the store index of the MUD data (supplier).
    Submit {
        #[arg(long)]
        from: String,
        #[arg(long)]
        uid: String,
        /// 64-hex store index from `store put`.
        #[arg(long)]
        index: String,
        /// Absolute seconds, or +N relative to chain time.
        #[arg(long)]
        deadline: String,
    },
    /// Rate a submission 0-100 (consumer).
    Rate {
        #[arg(long)]
        from: String,
        #[arg(long)]
        uid: String,
        #[arg(long)]
        supplier: String,
        #[arg(long)]
        score: u8,
    },
    /// Run the deadline sweep: expiries, refunds, default ratings.
    Expire {
        #[arg(long, default_value = "U1")]
        from: String,
    },
    /// Advance the chain's logical clock.
    Advance {
        /// Seconds to add.
        #[arg(long)]
        by: u64,
    },
    /// Read the public records (never mutates the journal).
    View {
        #[command(subcommand)]
        query: ViewCmd,
    },
    /// Off-chain content-addressed store.
    Store {
        #[command(subcommand)]
        cmd: StoreCmd,
    },
    /// MUD profile tools.
    Mud {
        #[command(subcommand)]
        cmd: MudCmd,
    },
    /// Scripted demonstration scenarios.
    Scenario {
        #[command(subcommand)]
        cmd: ScenarioCmd,
    },
    /// Aggregate per-function gas/cost table from saved scenario reports.
    GasReport,
}

#[derive(Subcommand)]
enum ViewCmd {
    /// Requests still open for offers.
    OpenRequests,
    /// Offers on one request.
    Offers {
        #[arg(long)]
        uid: String,
    },
    /// Full thread of one request.
    History {
        #[arg(long)]
        uid: String,
    },
    /// Everything recorded about one supplier.
    Supplier {
        #[arg(long)]
        addr: String,
    },
    /// Mean of a supplier's explicit ratings.
    Reputation {
        #[arg(long)]
        addr: String,
    },
}

#[derive(Subcommand)]
enum StoreCmd {
    /// Store a file; prints its index.
    Put { file: PathBuf },
    /// Retrieve a blob by index.
    Get {
        index: String,
        /// Write to a file instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Check that a file's content matches an index.
    Verify { index: String, file: PathBuf },
}

#[derive(Subcommand)]
enum MudCmd {
    /// Parse and summarize a MUD document.
    Parse { file: PathBuf },
    /// Derive a quality variant (HQ, MQR, MQO, LQ).
    Variant {
        file: PathBuf,
        #[arg(long)]
        tier: String,
        /// Seed for the LQ rule choice.
        #[arg(long)]
        seed: Option<u64>,
        /// Write to a file instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Offer-facing metadata of a document.
    Stats { file: PathBuf },
}

#[derive(Subcommand)]
enum ScenarioCmd {
    /// Run one scenario and write its transcript and report.
    Run {
        id: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run all eleven scenarios and print the gas table.
    All {
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    // Die quietly when stdout closes early (`mudmarket view ... | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}

fn resolve_config(overrides: &Overrides) -> Result<Config> {
    let mut config = match &overrides.config {
        Some(path) => Config::load(path)?,
        None => {
            let default_path = Path::new("mudmarket.toml");
            if default_path.exists() {
                Config::load(default_path)?
            } else {
                Config::default()
            }
        }
    };
    if let Some(path) = &overrides.journal {
        config.journal = path.clone();
    }
    if let Some(path) = &overrides.store_root {
        config.store_root = path.clone();
    }
    if let Some(path) = &overrides.out_dir {
        config.out_dir = path.clone();
    }
    if let Some(preset) = &overrides.preset {
        config.preset = preset.clone();
    }
    if let Some(gas_per_eth) = overrides.gas_per_eth {
        config.gas_per_eth = gas_per_eth;
    }
    if let Some(usd_per_eth) = overrides.usd_per_eth {
        config.usd_per_eth = usd_per_eth;
    }
    if let Some(rating_window) = overrides.rating_window {
        config.rating_window = rating_window;
    }
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let config = resolve_config(&cli.overrides)?;
    let json = cli.json;
    match cli.command {
        Command::Init {
            accounts,
            balance,
            force,
        } => cmd_init(&config, accounts, &balance, force, json),
        Command::Request {
            from,
            manufacturer,
            device,
            model,
            firmware,
            cpe,
            budget,
            deadline,
        } => run_call(&config, json, |market| {
            let sender = resolve_account(market, &from)?;
            let device =
                DeviceSpec::new(&manufacturer, &device, &model, &firmware, cpe.as_deref())?;
            Ok((
                sender,
                ContractCall::Request {
                    device,
                    budget: parse_eth(&budget)?,
                    deadline: parse_deadline(&deadline, market.chain().now())?,
                },
            ))
        }),
        Command::Offer {
            from,
            uid,
            ace_count,
            size_kb,
            flow_scope,
            network_setting,
            price,
            deadline,
        } => run_call(&config, json, |market| {
            Ok((
                resolve_account(market, &from)?,
                ContractCall::Offer {
                    uid: parse_uid(&uid)?,
                    ace_count,
                    file_size_kb: size_kb,
                    flow_scope: flow_scope.clone(),
                    network_setting: network_setting.clone(),
                    price: parse_eth(&price)?,
                    deadline: parse_deadline(&deadline, market.chain().now())?,
                },
            ))
        }),
        Command::Select {
            from,
            uid,
            suppliers,
        } => run_call(&config, json, |market| {
            let suppliers = suppliers
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| resolve_account(market, s.trim()))
                .collect::<Result<Vec<Address>>>()?;
            Ok((
                resolve_account(market, &from)?,
                ContractCall::Select {
                    uid: parse_uid(&uid)?,
                    suppliers,
                },
            ))
        }),
        Command::Submit {
            from,
            uid,
            index,
            deadline,
        } => run_call(&config, json, |market| {
            Ok((
                resolve_account(market, &from)?,
                ContractCall::Submit {
                    uid: parse_uid(&uid)?,
                    index: index
                        .parse::<StoreIndex>()
                        .map_err(|e| CliError::Usage(e.to_string()))?,
                    deadline: parse_deadline(&deadline, market.chain().now())?,
                },
            ))
        }),
        Command::Rate {
            from,
            uid,
            supplier,
            score,
        } => run_call(&config, json, |market| {
            Ok((
                resolve_account(market, &from)?,
                ContractCall::Rate {
                    uid: parse_uid(&uid)?,
                    supplier: resolve_account(market, &supplier)?,
                    score,
                },
            ))
        }),
        Command::Expire { from } => run_call(&config, json, |market| {
            Ok((resolve_account(market, &from)?, ContractCall::Expire))
        }),
        Command::Advance { by } => cmd_advance(&config, by, json),
        Command::View { query } => cmd_view(&config, query, json),
        Command::Store { cmd } => cmd_store(&config, cmd, json),
        Command::Mud { cmd } => cmd_mud(cmd, json),
        Command::Scenario { cmd } => cmd_scenario(&config, cmd, json),
        Command::GasReport => cmd_gas_report(&config, json),
    }
}

// ---------------------------------------------------------------------------
// Argument parsing helpers
// ---------------------------------------------------------------------------

/// Exact decimal-ETH to wei conversion (up to 18 fractional digits).
fn parse_eth(s: &str) -> Result<u128> {
    let bad = || CliError::Usage(format!("`{s}` is not a decimal ETH amount"));
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
        || frac_part.len() > 18
    {
        return Err(bad());
    }
    let int_value: u128 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| bad())?
    };
    let mut frac = frac_part.to_string();
    while frac.len() < 18 {
        frac.push('0');
    }
    let frac_value: u128 = if frac.is_empty() {
        0
    } else {
        frac.parse().map_err(|_| bad())?
    };
    int_value
        .checked_mul(WEI_PER_ETH)
        .and_then(|wei| wei.checked_add(frac_value))
        .ok_or_else(bad)
}

fn wei_to_eth(wei: u128) -> f64 {
    wei as f64 / WEI_PER_ETH as f64
}

/// `+N` is relative to the chain clock; a bare number is absolute seconds.
fn parse_deadline(s: &str, now: u64) -> Result<u64> {
    let bad = || CliError::Usage(format!("`{s}` is not a deadline (seconds or +seconds)"));
    if let Some(rel) = s.strip_prefix('+') {
        let offset: u64 = rel.parse().map_err(|_| bad())?;
        Ok(now + offset)
    } else {
        s.parse().map_err(|_| bad())
    }
}

fn parse_uid(s: &str) -> Result<mudmarket_core::contract::Uid> {
    s.parse()
        .map_err(|e: mudmarket_core::ParseIdError| CliError::Usage(e.to_string()))
}

/// Accepts `U<n>` labels or 40-hex addresses.
fn resolve_account(market: &Marketplace, s: &str) -> Result<Address> {
    if let Some(n) = s.strip_prefix('U').and_then(|n| n.parse::<usize>().ok()) {
        return market
            .chain()
            .accounts()
            .get(
                n.checked_sub(1)
                    .ok_or_else(|| CliError::Usage("account labels start at U1".into()))?,
            )
            .map(|a| a.address)
            .ok_or_else(|| CliError::Usage(format!("no account `{s}` on this chain")));
    }
    s.parse()
        .map_err(|e: mudmarket_core::ParseIdError| CliError::Usage(e.to_string()))
}

fn label_of(market: &Marketplace, address: Address) -> String {
    if let Some(i) = market
        .chain()
        .accounts()
        .iter()
        .position(|a| a.address == address)
    {
        return format!("U{}", i + 1);
    }
    address.to_string()
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_init(
    config: &Config,
    accounts: usize,
    balance: &str,
    force: bool,
    json: bool,
) -> Result<()> {
    let _lock = JournalLock::acquire(&config.journal)?;
    let balance_wei = parse_eth(balance)?;
    let market = journal::init(&config.journal, config, accounts, balance_wei, force)?;
    if json {
        let listing: Vec<_> = market
            .chain()
            .accounts()
            .iter()
            .enumerate()
            .map(|(i, a)| json!({ "label": format!("U{}", i + 1), "address": a.address, "balance_wei": a.balance.to_string() }))
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(
                &json!({ "journal": config.journal, "accounts": listing })
            )?
        );
        return Ok(());
    }
    println!(
        "initialized {} with {} accounts of {} ETH (preset {})",
        config.journal.display(),
        accounts,
        balance,
        config.preset
    );
    for (i, account) in market.chain().accounts().iter().enumerate() {
        println!("  U{:<3} {}", i + 1, account.address);
    }
    Ok(())
}

fn run_call(
    config: &Config,
    json: bool,
    build: impl FnOnce(&Marketplace) -> Result<(Address, ContractCall)>,
) -> Result<()> {
    let _lock = JournalLock::acquire(&config.journal)?;
    let mut market = journal::load(&config.journal)?;
    let (sender, call) = build(&market)?;
    let timestamp = market.chain().now();
    let outcome = market.execute(sender, call.clone())?;
    if let Some(record) = journal::block_record(sender, call, &outcome, timestamp) {
        journal::append(&config.journal, &record)?;
    }
    print_outcome(&market, &outcome, json)
}

fn print_outcome(market: &Marketplace, outcome: &CallOutcome, json: bool) -> Result<()> {
    let schedule = market.schedule();
    if json {
        let (uid, receipt, transitions) = match outcome {
            CallOutcome::Requested { uid, receipt } => (Some(*uid), Some(receipt), Vec::new()),
            CallOutcome::Committed { receipt } => (None, Some(receipt), Vec::new()),
            CallOutcome::Swept {
                transitions,
                receipt,
            } => (None, receipt.as_ref(), transitions.clone()),
        };
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "uid": uid,
                "receipt": receipt,
                "transitions": transitions,
            }))?
        );
        return Ok(());
    }
    match outcome {
        CallOutcome::Requested { uid, receipt } => {
            let (fee_eth, cost_usd) = fee_report(receipt.gas_used, schedule);
            println!(
                "committed fn={} block={} payload_bytes={} gas={} fee_eth={fee_eth:.9} cost_usd={cost_usd:.2}",
                receipt.function, receipt.block_number, receipt.payload_bytes, receipt.gas_used
            );
            println!("uid={uid}");
        }
        CallOutcome::Committed { receipt } => {
            let (fee_eth, cost_usd) = fee_report(receipt.gas_used, schedule);
            println!(
                "committed fn={} block={} payload_bytes={} gas={} fee_eth={fee_eth:.9} cost_usd={cost_usd:.2}",
                receipt.function, receipt.block_number, receipt.payload_bytes, receipt.gas_used
            );
        }
        CallOutcome::Swept {
            transitions,
            receipt,
        } => {
            if transitions.is_empty() {
                println!("nothing to expire");
                return Ok(());
            }
            for transition in transitions {
                match transition {
                    Transition::RequestExpired { uid } => println!("expired request {uid}"),
                    Transition::OfferExpiredUnselected { uid, supplier } => println!(
                        "expired unselected offer from {} on {uid}",
                        label_of(market, *supplier)
                    ),
                    Transition::OfferExpiredUnsubmitted {
                        uid,
                        supplier,
                        refund_wei,
                    } => println!(
                        "expired unsubmitted offer from {} on {uid}; refunded {:.6} ETH",
                        label_of(market, *supplier),
                        wei_to_eth(*refund_wei)
                    ),
                    Transition::DefaultRating { uid, supplier } => println!(
                        "default rating persists for {} on {uid}",
                        label_of(market, *supplier)
                    ),
                    Transition::RequestClosed { uid } => println!("closed request {uid}"),
                }
            }
            if let Some(receipt) = receipt {
                println!(
                    "committed fn=expire block={} transitions={}",
                    receipt.block_number,
                    transitions.len()
                );
            }
        }
    }
    Ok(())
}

fn cmd_advance(config: &Config, by: u64, json: bool) -> Result<()> {
    let _lock = JournalLock::acquire(&config.journal)?;
    let mut market = journal::load(&config.journal)?;
    market.advance_time(by);
    let now = market.chain().now();
    journal::append(&config.journal, &journal::JournalRecord::Time { now })?;
    if json {
        println!("{}", json!({ "now": now }));
    } else {
        println!("chain time is now {now}");
    }
    Ok(())
}

fn cmd_view(config: &Config, query: ViewCmd, json: bool) -> Result<()> {
    let market = journal::load(&config.journal)?;
    let query = match query {
        ViewCmd::OpenRequests => ViewQuery::OpenRequests,
        ViewCmd::Offers { uid } => ViewQuery::OffersFor(parse_uid(&uid)?),
        ViewCmd::History { uid } => ViewQuery::History(parse_uid(&uid)?),
        ViewCmd::Supplier { addr } => ViewQuery::SupplierHistory(resolve_account(&market, &addr)?),
        ViewCmd::Reputation { addr } => ViewQuery::Reputation(resolve_account(&market, &addr)?),
    };
    let result = market.view(&query);
    if json {
        println!("{}", serde_json::to_string_pretty(&result)?);
        return Ok(());
    }
    match result {
        ViewResult::OpenRequests(requests) => {
            println!("{} open request(s)", requests.len());
            for r in requests {
                println!(
                    "  uid={} consumer={} budget_eth={:.6} deadline={} device={}/{}",
                    r.uid,
                    label_of(&market, r.consumer),
                    wei_to_eth(r.budget),
                    r.deadline,
                    r.device.manufacturer,
                    r.device.device_name,
                );
            }
        }
        ViewResult::Offers(offers) => {
            println!("{} offer(s)", offers.len());
            for o in offers {
                println!(
                    "  supplier={} price_eth={:.6} aces={} size_kb={:.3} scope={} status={:?}{}",
                    label_of(&market, o.supplier),
                    wei_to_eth(o.price),
                    o.ace_count,
                    o.file_size_kb,
                    o.flow_scope,
                    o.status,
                    if o.over_budget { " over_budget" } else { "" },
                );
            }
        }
        ViewResult::History(None) => println!("no such request"),
        ViewResult::History(Some(h)) => {
            println!(
                "request uid={} consumer={} status={:?} budget_eth={:.6}",
                h.request.uid,
                label_of(&market, h.request.consumer),
                h.request.status,
                wei_to_eth(h.request.budget),
            );
            for o in &h.offers {
                println!(
                    "  offer supplier={} price_eth={:.6} status={:?}",
                    label_of(&market, o.supplier),
                    wei_to_eth(o.price),
                    o.status
                );
            }
            for s in &h.submissions {
                println!(
                    "  submission supplier={} index={} at={}",
                    label_of(&market, s.supplier),
                    s.store_index,
                    s.submitted_at
                );
            }
            for r in &h.ratings {
                match r.score {
                    Score::Explicit(score) => println!(
                        "  rating supplier={} score={score}",
                        label_of(&market, r.supplier)
                    ),
                    Score::Default => println!(
                        "  rating supplier={} score=default",
                        label_of(&market, r.supplier)
                    ),
                }
            }
        }
        ViewResult::SupplierHistory(h) => {
            println!(
                "offers={} submissions={} ratings={}",
                h.offers.len(),
                h.submissions.len(),
                h.ratings.len()
            );
            for o in &h.offers {
                println!(
                    "  offer uid={} price_eth={:.6} status={:?}",
                    o.request_uid,
                    wei_to_eth(o.price),
                    o.status
                );
            }
        }
        ViewResult::Reputation(None) => println!("reputation: none (never rated)"),
        ViewResult::Reputation(Some(score)) => println!("reputation: {score:.2}"),
    }
    Ok(())
}

fn cmd_store(config: &Config, cmd: StoreCmd, json: bool) -> Result<()> {
    let mut store = FsStore::open(&config.store_root)?;
    match cmd {
        StoreCmd::Put { file } => {
            let content = std::fs::read(&file)?;
            let index = store.put(&content)?;
            if json {
                println!("{}", json!({ "index": index, "bytes": content.len() }));
            } else {
                println!("{index}");
            }
        }
        StoreCmd::Get { index, out } => {
            let index: StoreIndex = index
                .parse()
                .map_err(|e: mudmarket_core::ParseIdError| CliError::Usage(e.to_string()))?;
            let content = store.get(&index)?;
            match out {
                Some(path) => std::fs::write(path, &content)?,
                None => std::io::stdout().write_all(&content)?,
            }
        }
        StoreCmd::Verify { index, file } => {
            let index: StoreIndex = index
                .parse()
                .map_err(|e: mudmarket_core::ParseIdError| CliError::Usage(e.to_string()))?;
            let content = std::fs::read(&file)?;
            let ok = store.verify(&index, &content);
            if json {
                println!("{}", json!({ "index": index, "verified": ok }));
            } else {
                println!("{}", if ok { "verified" } else { "MISMATCH" });
            }
            if !ok {
                return Err(CliError::Store(
                    mudmarket_core::offstore::StoreError::Corrupt {
                        index,
                        actual: mudmarket_core::offstore::digest(&content),
                    },
                ));
            }
        }
    }
    Ok(())
}

fn cmd_mud(cmd: MudCmd, json: bool) -> Result<()> {
    match cmd {
        MudCmd::Parse { file } => {
            let text = std::fs::read_to_string(&file)?;
            let profile = mudfile::parse(&text)?;
            let stats = mudfile::stats(&profile);
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&json!({
                        "mud_url": profile.mud_url,
                        "system_info": profile.system_info,
                        "last_update": profile.last_update,
                        "from_device_aces": profile.from_device_aces.len(),
                        "to_device_aces": profile.to_device_aces.len(),
                        "stats": stats,
                    }))?
                );
            } else {
                println!("mud-url:     {}", profile.mud_url);
                println!("systeminfo:  {}", profile.system_info);
                println!("last-update: {}", profile.last_update);
                println!(
                    "aces:        {} ({} from-device, {} to-device)",
                    profile.ace_count(),
                    profile.from_device_aces.len(),
                    profile.to_device_aces.len()
                );
                println!("size_kb:     {:.3}", stats.size_kb);
                println!("flow_scope:  {}", stats.flow_scope);
            }
        }
        MudCmd::Variant {
            file,
            tier,
            seed,
            out,
        } => {
            let text = std::fs::read_to_string(&file)?;
            let profile = mudfile::parse(&text)?;
            let tier: QualityTier = tier.parse()?;
            let variant = mudfile::derive_variant(&profile, tier, seed.unwrap_or(0))?;
            let rendered = mudfile::serialize(&variant);
            match out {
                Some(path) => std::fs::write(path, rendered)?,
                None => print!("{rendered}"),
            }
        }
        MudCmd::Stats { file } => {
            let text = std::fs::read_to_string(&file)?;
            let profile = mudfile::parse(&text)?;
            let stats = mudfile::stats(&profile);
            if json {
                println!("{}", serde_json::to_string_pretty(&stats)?);
            } else {
                println!(
                    "ace_count={} size_kb={:.3} flow_scope={}",
                    stats.ace_count, stats.size_kb, stats.flow_scope
                );
            }
        }
    }
    Ok(())
}

fn report_paths(config: &Config) -> (PathBuf, PathBuf) {
    (
        config.out_dir.join("transcripts"),
        config.out_dir.join("reports"),
    )
}

fn write_report(config: &Config, report: &ScenarioReport) -> Result<()> {
    let (transcripts, reports) = report_paths(config);
    std::fs::create_dir_all(&transcripts)?;
    std::fs::create_dir_all(&reports)?;
    let id = report.id.label().to_lowercase();
    std::fs::write(transcripts.join(format!("{id}.txt")), &report.transcript)?;
    std::fs::write(
        reports.join(format!("{id}.json")),
        serde_json::to_string_pretty(report)?,
    )?;
    Ok(())
}

fn print_scenario_summary(report: &ScenarioReport, json: bool) -> Result<()> {
    if json {
        let value = json!({
            "id": report.id,
            "seed": report.seed,
            "counts": report.counts,
            "ratings_given": report.ratings_given,
            "transcript_digest": report.transcript_digest,
        });
        println!("{}", serde_json::to_string(&value)?);
        return Ok(());
    }
    match &report.counts {
        Some(c) => println!(
            "{} seed={}: offers={} selected={} submitted={} rated={} digest={}",
            report.id,
            report.seed,
            c.offers,
            c.selected,
            c.submitted,
            c.rated,
            &report.transcript_digest[..16],
        ),
        None => println!(
            "{} seed={}: read-only viewing digest={}",
            report.id,
            report.seed,
            &report.transcript_digest[..16],
        ),
    }
    Ok(())
}

fn cmd_scenario(config: &Config, cmd: ScenarioCmd, json: bool) -> Result<()> {
    match cmd {
        ScenarioCmd::Run { id, seed } => {
            let id: ScenarioId = id.parse()?;
            let seed = seed.unwrap_or(config.seed);
            let report = run_scenario(id, seed)?;
            write_report(config, &report)?;
            print_scenario_summary(&report, json)?;
            if !json {
                let (transcripts, _) = report_paths(config);
                println!(
                    "transcript: {}",
                    transcripts
                        .join(format!("{}.txt", id.label().to_lowercase()))
                        .display()
                );
            }
        }
        ScenarioCmd::All { seed } => {
            let seed = seed.unwrap_or(config.seed);
            let reports = run_all(seed)?;
            for report in &reports {
                write_report(config, report)?;
                print_scenario_summary(report, json)?;
            }
            let schedule = journal_schedule(config)?;
            let gas = gas_report(reports.iter().map(|r| &r.usage), &schedule);
            emit_gas_report(config, &gas, json)?;
        }
    }
    Ok(())
}

/// Schedule used for report figures: the configured preset and rates.
fn journal_schedule(config: &Config) -> Result<mudmarket_core::ledger::GasSchedule> {
    let schedule = mudmarket_core::ledger::GasSchedule::preset(&config.preset)
        .ok_or_else(|| CliError::Usage(format!("unknown gas preset `{}`", config.preset)))?;
    Ok(schedule.with_rates(config.gas_per_eth, config.usd_per_eth)?)
}

fn emit_gas_report(config: &Config, gas: &GasReport, json: bool) -> Result<()> {
    std::fs::create_dir_all(&config.out_dir)?;
    let path = config.out_dir.join("gas_report.json");
    std::fs::write(&path, serde_json::to_string_pretty(gas)?)?;
    if json {
        println!("{}", serde_json::to_string_pretty(gas)?);
    } else {
        print!("{}", render_gas_table(gas));
        println!("written: {}", path.display());
    }
    Ok(())
}

fn cmd_gas_report(config: &Config, json: bool) -> Result<()> {
    let (_, reports_dir) = report_paths(config);
    let mut reports: Vec<ScenarioReport> = Vec::new();
    let entries = match std::fs::read_dir(&reports_dir) {
        Ok(entries) => entries,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CliError::Journal(format!(
                "no saved reports in {} (run `mudmarket scenario all` first)",
                reports_dir.display()
            )))
        }
        Err(e) => return Err(e.into()),
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let text = std::fs::read_to_string(&path)?;
        reports.push(serde_json::from_str(&text)?);
    }
    if reports.is_empty() {
        return Err(CliError::Journal(format!(
            "no saved reports in {} (run `mudmarket scenario all` first)",
            reports_dir.display()
        )));
    }
    let schedule = journal_schedule(config)?;
    let gas = gas_report(reports.iter().map(|r| &r.usage), &schedule);
    emit_gas_report(config, &gas, json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eth_parsing_is_exact() {
        assert_eq!(parse_eth("2").unwrap(), 2 * WEI_PER_ETH);
        assert_eq!(parse_eth("0.5").unwrap(), WEI_PER_ETH / 2);
        assert_eq!(parse_eth("100").unwrap(), 100 * WEI_PER_ETH);
        assert_eq!(
            parse_eth("0.017125767441860465").unwrap(),
            17_125_767_441_860_465
        );
        assert_eq!(parse_eth(".25").unwrap(), WEI_PER_ETH / 4);
        assert!(parse_eth("").is_err());
        assert!(parse_eth(".").is_err());
        assert!(parse_eth("1.2.3").is_err());
        assert!(parse_eth("x").is_err());
        assert!(parse_eth("0.0000000000000000001").is_err());
    }

    #[test]
    fn deadline_parsing() {
        assert_eq!(parse_deadline("+60", 100).unwrap(), 160);
        assert_eq!(parse_deadline("3600", 100).unwrap(), 3600);
        assert!(parse_deadline("+x", 0).is_err());
        assert!(parse_deadline("soon", 0).is_err());
    }
}
