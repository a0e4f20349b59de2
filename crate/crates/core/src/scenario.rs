//! Scripted demonstration scenarios and their diffable transcripts.
//!
//! Each scenario starts from a fresh 10-user genesis (100 ETH each, `paper`
//! gas preset) and drives one scripted exchange: basic cycles (BS01–BS04),
//! exception handling (ES01–ES03), selection strategies (SS01–SS03), and a
//! read-only viewing pass (VS01) that replays the other ten on a single chain
//! before querying it. `(id, seed)` fully determines the transcript; its
//! SHA-256 digest is recorded in the report.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contract::{ContractError, Marketplace, OfferMeta, OfferStatus, Score, Transition, Uid};
use crate::ledger::{Address, Chain, Function, GasSchedule, LedgerError, TxReceipt, WEI_PER_ETH};
use crate::market::{
    infer_tier, rate_policy, select_offers, DeviceCatalog, FunctionUsage, Strategy,
};
use crate::mudfile::{self, MudError, QualityTier};
use crate::offstore::{digest, MemStore, MudStore, StoreError, StoreIndex};

/// Genesis used by every scenario: 10 users, 100 ETH each.
pub const GENESIS_ACCOUNTS: usize = 10;
pub const GENESIS_BALANCE: u128 = 100 * WEI_PER_ETH;

/// Advisory budget attached to scripted requests.
pub const SCENARIO_BUDGET: u128 = 2 * WEI_PER_ETH;

/// Deadline windows used by scripted requests and offers, in seconds.
pub const REQUEST_WINDOW: u64 = 3600;
pub const OFFER_WINDOW: u64 = 1800;

/// Scripted supplier prices are drawn uniformly from [0.1, 1.0] ETH.
pub const PRICE_MIN: u128 = WEI_PER_ETH / 10;
pub const PRICE_MAX: u128 = WEI_PER_ETH;

/// The eleven demonstration scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ScenarioId {
    Bs01,
    Bs02,
    Bs03,
    Bs04,
    Es01,
    Es02,
    Es03,
    Ss01,
    Ss02,
    Ss03,
    Vs01,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 11] = [
        ScenarioId::Bs01,
        ScenarioId::Bs02,
        ScenarioId::Bs03,
        ScenarioId::Bs04,
        ScenarioId::Es01,
        ScenarioId::Es02,
        ScenarioId::Es03,
        ScenarioId::Ss01,
        ScenarioId::Ss02,
        ScenarioId::Ss03,
        ScenarioId::Vs01,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ScenarioId::Bs01 => "BS01",
            ScenarioId::Bs02 => "BS02",
            ScenarioId::Bs03 => "BS03",
            ScenarioId::Bs04 => "BS04",
            ScenarioId::Es01 => "ES01",
            ScenarioId::Es02 => "ES02",
            ScenarioId::Es03 => "ES03",
            ScenarioId::Ss01 => "SS01",
            ScenarioId::Ss02 => "SS02",
            ScenarioId::Ss03 => "SS03",
            ScenarioId::Vs01 => "VS01",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ScenarioId::Bs01 => "full five-function cycle",
            ScenarioId::Bs02 => "full cycle without the rating step",
            ScenarioId::Bs03 => "four offers; the first arrival is selected",
            ScenarioId::Bs04 => "four offers; the first three arrivals are selected",
            ScenarioId::Es01 => "selected suppliers never submit; escrow is refunded",
            ScenarioId::Es02 => "consumer selects no offer",
            ScenarioId::Es03 => "request receives no offers and expires",
            ScenarioId::Ss01 => "three largest sizes within budget are selected",
            ScenarioId::Ss02 => "three lowest prices within budget are selected",
            ScenarioId::Ss03 => "three most reputable suppliers are selected",
            ScenarioId::Vs01 => "read-only viewing of past transactions",
        }
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|id| *id == self).expect("listed")
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ScenarioId {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|id| id.label() == upper)
            .ok_or_else(|| UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownScenario(pub String);

impl fmt::Display for UnknownScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown scenario `{}`", self.0)
    }
}

impl core::error::Error for UnknownScenario {}

/// Outcome counts of the measured exchange of one scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioCounts {
    pub offers: u32,
    pub selected: u32,
    pub submitted: u32,
    pub rated: u32,
}

/// The counts each scenario is scripted to produce; `None` for the read-only
/// viewing scenario.
pub fn expected_counts(id: ScenarioId) -> Option<ScenarioCounts> {
    let c = |offers, selected, submitted, rated| ScenarioCounts {
        offers,
        selected,
        submitted,
        rated,
    };
    match id {
        ScenarioId::Bs01 => Some(c(1, 1, 1, 1)),
        ScenarioId::Bs02 => Some(c(1, 1, 1, 0)),
        ScenarioId::Bs03 => Some(c(4, 1, 1, 1)),
        ScenarioId::Bs04 => Some(c(4, 3, 3, 3)),
        ScenarioId::Es01 => Some(c(4, 3, 0, 0)),
        ScenarioId::Es02 => Some(c(4, 0, 0, 0)),
        ScenarioId::Es03 => Some(c(0, 0, 0, 0)),
        ScenarioId::Ss01 | ScenarioId::Ss02 | ScenarioId::Ss03 => Some(c(4, 3, 3, 3)),
        ScenarioId::Vs01 => None,
    }
}

/// Result of one scenario run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub id: ScenarioId,
    pub seed: u64,
    pub device: Option<String>,
    pub counts: Option<ScenarioCounts>,
    /// Per-function call tallies from this scenario's own chain. Empty for
    /// VS01, whose replayed calls belong to their originating scenarios.
    pub usage: BTreeMap<Function, FunctionUsage>,
    /// Explicit ratings given on the measured request: `(supplier, score)`.
    pub ratings_given: Vec<(String, u8)>,
    /// Quality tier of each submitted profile on the measured request.
    pub tiers_submitted: Vec<(String, String)>,
    pub final_balances: Vec<(String, u128)>,
    pub escrow_total: u128,
    pub transcript: String,
    pub transcript_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    Ledger(LedgerError),
    Contract(ContractError),
    Store(StoreError),
    Mud(MudError),
    /// Retrieved content did not match any variant of the requested device.
    UnknownTier {
        uid: Uid,
        supplier: Address,
    },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Ledger(e) => write!(f, "scenario ledger failure: {e}"),
            ScenarioError::Contract(e) => write!(f, "scenario contract failure: {e}"),
            ScenarioError::Store(e) => write!(f, "scenario store failure: {e}"),
            ScenarioError::Mud(e) => write!(f, "scenario mud failure: {e}"),
            ScenarioError::UnknownTier { uid, supplier } => write!(
                f,
                "retrieved data from {supplier} on request {uid} matches no known tier"
            ),
        }
    }
}

impl core::error::Error for ScenarioError {}

impl From<LedgerError> for ScenarioError {
    fn from(e: LedgerError) -> Self {
        ScenarioError::Ledger(e)
    }
}

impl From<ContractError> for ScenarioError {
    fn from(e: ContractError) -> Self {
        ScenarioError::Contract(e)
    }
}

impl From<StoreError> for ScenarioError {
    fn from(e: StoreError) -> Self {
        ScenarioError::Store(e)
    }
}

impl From<MudError> for ScenarioError {
    fn from(e: MudError) -> Self {
        ScenarioError::Mud(e)
    }
}

// ---------------------------------------------------------------------------
// Runner environment
// ---------------------------------------------------------------------------

struct Env {
    market: Marketplace,
    store: MemStore,
    catalog: DeviceCatalog,
    transcript: Vec<String>,
}

impl Env {
    fn fresh() -> Result<Self, ScenarioError> {
        let chain = Chain::genesis(GENESIS_ACCOUNTS, GENESIS_BALANCE)?;
        Ok(Self {
            market: Marketplace::new(chain, GasSchedule::paper()),
            store: MemStore::new(),
            catalog: DeviceCatalog::bundled(),
            transcript: Vec::new(),
        })
    }

    /// Address of user `Un` (1-based, matching the transcript labels).
    fn user(&self, n: usize) -> Address {
        self.market.chain().accounts()[n - 1].address
    }

    fn label(&self, address: Address) -> String {
        if let Some(i) = self
            .market
            .chain()
            .accounts()
            .iter()
            .position(|a| a.address == address)
        {
            return format!("U{}", i + 1);
        }
        if address == self.market.chain().fee_sink().address {
            return "fee_sink".to_string();
        }
        address.to_string()
    }

    fn line(&mut self, line: String) {
        self.transcript.push(line);
    }

    fn log_receipt(&mut self, receipt: &TxReceipt, uid: Option<Uid>) {
        let sender = self.label(receipt.sender);
        let timestamp = self.market.chain().now();
        self.line(format!(
            "call fn={} sender={} block={} ts={} payload_bytes={} gas={} fee_wei={} uid={}",
            receipt.function,
            sender,
            receipt.block_number,
            timestamp,
            receipt.payload_bytes,
            receipt.gas_used,
            receipt.fee_wei,
            uid.map_or_else(|| "-".to_string(), |uid| uid.to_string()),
        ));
    }

    fn advance(&mut self, seconds: u64) {
        self.market.advance_time(seconds);
        self.line(format!(
            "advance by={} now={}",
            seconds,
            self.market.chain().now()
        ));
    }

    fn sweep(&mut self, sweeper: usize) -> Result<Vec<Transition>, ScenarioError> {
        let address = self.user(sweeper);
        let (transitions, receipt) = self.market.expire(address)?;
        self.line(format!(
            "sweep sweeper=U{} now={} transitions={}",
            sweeper,
            self.market.chain().now(),
            transitions.len()
        ));
        for transition in &transitions {
            self.line(match transition {
                Transition::RequestExpired { uid } => {
                    format!("transition kind=request_expired uid={uid}")
                }
                Transition::OfferExpiredUnselected { uid, supplier } => format!(
                    "transition kind=offer_expired_unselected uid={uid} supplier={}",
                    self.label(*supplier)
                ),
                Transition::OfferExpiredUnsubmitted {
                    uid,
                    supplier,
                    refund_wei,
                } => format!(
                    "transition kind=offer_expired_unsubmitted uid={uid} supplier={} refund_wei={refund_wei}",
                    self.label(*supplier)
                ),
                Transition::DefaultRating { uid, supplier } => format!(
                    "transition kind=default_rating uid={uid} supplier={}",
                    self.label(*supplier)
                ),
                Transition::RequestClosed { uid } => {
                    format!("transition kind=request_closed uid={uid}")
                }
            });
        }
        if let Some(receipt) = &receipt {
            self.log_receipt(receipt, None);
        }
        Ok(transitions)
    }
}

fn scenario_rng(seed: u64, id: ScenarioId) -> (u64, ChaCha8Rng) {
    // Per-scenario stream so one scenario draws identically whether it runs
    // standalone or inside VS01's replay.
    let derived = seed ^ (0x9E37_79B9_7F4A_7C15u64).wrapping_mul(id.index() as u64 + 1);
    (derived, ChaCha8Rng::seed_from_u64(derived))
}

// ---------------------------------------------------------------------------
// Exchange script
// ---------------------------------------------------------------------------

/// How the scripted suppliers pick quality tiers.
enum TierPlan<'a> {
    /// Per-supplier tiers by arrival index; suppliers beyond the slice pick
    /// a seeded tier.
    Fixed(&'a [QualityTier]),
    /// The given set is dealt across the first three arrivals in seeded
    /// order; later suppliers pick a seeded tier.
    ShuffledSet([QualityTier; 3]),
    /// Every supplier picks one of the four tiers uniformly at random.
    Seeded,
}

enum SelectionMode {
    Strategy(Strategy),
    /// Explicit empty selection: the consumer closes the request unserved.
    SelectNone,
    /// No selection call at all; the request is left to expire.
    Skip,
}

struct ExchangePlan<'a> {
    consumer: usize,
    suppliers: &'a [usize],
    device: &'static str,
    tiers: TierPlan<'a>,
    selection: SelectionMode,
    submit: bool,
    rate: bool,
}

fn run_exchange(
    env: &mut Env,
    rng: &mut ChaCha8Rng,
    plan: ExchangePlan<'_>,
) -> Result<Uid, ScenarioError> {
    let now = env.market.chain().now();
    let consumer = env.user(plan.consumer);
    let entry = env
        .catalog
        .get(plan.device)
        .expect("scripted scenarios use bundled devices");
    let device = entry.device.clone();
    let reference = entry.profile.clone();

    env.line(format!(
        "exchange consumer=U{} suppliers=[{}] device={} budget_wei={}",
        plan.consumer,
        plan.suppliers
            .iter()
            .map(|n| format!("U{n}"))
            .collect::<Vec<_>>()
            .join(","),
        plan.device,
        SCENARIO_BUDGET,
    ));

    let (uid, receipt) =
        env.market
            .request(consumer, device, SCENARIO_BUDGET, now + REQUEST_WINDOW)?;
    env.log_receipt(&receipt, Some(uid));

    // Tier plan draws happen before any offer so the draw order is fixed.
    let mut dealt: Vec<QualityTier> = Vec::new();
    if let TierPlan::ShuffledSet(set) = &plan.tiers {
        let mut pool = *set;
        pool.shuffle(rng);
        dealt = pool.to_vec();
    }

    let mut uploads: BTreeMap<Address, (Vec<u8>, StoreIndex)> = BTreeMap::new();
    for (arrival, n) in plan.suppliers.iter().enumerate() {
        let supplier = env.user(*n);
        let tier = match &plan.tiers {
            TierPlan::Fixed(fixed) => fixed.get(arrival).copied(),
            TierPlan::ShuffledSet(_) => dealt.get(arrival).copied(),
            TierPlan::Seeded => None,
        }
        .unwrap_or_else(|| QualityTier::ALL[rng.gen_range(0..QualityTier::ALL.len())]);
        let lq_seed = if tier == QualityTier::Lq {
            Some(rng.next_u64())
        } else {
            None
        };
        let variant = mudfile::derive_variant(&reference, tier, lq_seed.unwrap_or(0))?;
        let stats = mudfile::stats(&variant);
        let bytes = mudfile::serialize(&variant).into_bytes();
        let index = digest(&bytes);
        let price = rng.gen_range(PRICE_MIN..=PRICE_MAX);
        env.line(format!(
            "pick supplier=U{} tier={} lq_seed={} price_wei={} aces={} size_kb={:.3} scope={}",
            n,
            tier,
            lq_seed.map_or_else(|| "-".to_string(), |s| s.to_string()),
            price,
            stats.ace_count,
            stats.size_kb,
            stats.flow_scope,
        ));
        let meta = OfferMeta {
            ace_count: stats.ace_count,
            file_size_kb: stats.size_kb,
            flow_scope: stats.flow_scope,
            network_setting: "residential-gateway".into(),
        };
        let receipt = env
            .market
            .offer(supplier, uid, meta, price, now + OFFER_WINDOW)?;
        env.log_receipt(&receipt, Some(uid));
        uploads.insert(supplier, (bytes, index));
    }

    let chosen: Vec<Address> = match &plan.selection {
        SelectionMode::Strategy(strategy) => {
            let mut reputations = BTreeMap::new();
            for offer in env.market.offers_for(uid) {
                if let Some(score) = env.market.reputation(offer.supplier) {
                    reputations.insert(offer.supplier, score);
                }
            }
            let chosen = select_offers(
                *strategy,
                env.market.offers_for(uid),
                SCENARIO_BUDGET,
                &reputations,
            );
            env.line(format!(
                "select strategy={} chosen=[{}]",
                strategy,
                chosen
                    .iter()
                    .map(|a| env.label(*a))
                    .collect::<Vec<_>>()
                    .join(","),
            ));
            let receipt = env.market.select(consumer, uid, &chosen)?;
            env.log_receipt(&receipt, Some(uid));
            chosen
        }
        SelectionMode::SelectNone => {
            env.line("select strategy=none chosen=[]".to_string());
            let receipt = env.market.select(consumer, uid, &[])?;
            env.log_receipt(&receipt, Some(uid));
            Vec::new()
        }
        SelectionMode::Skip => Vec::new(),
    };

    if plan.submit {
        for supplier in &chosen {
            let (bytes, index) = uploads.get(supplier).expect("chosen suppliers offered");
            let stored = env.store.put(bytes)?;
            debug_assert_eq!(stored, *index);
            env.line(format!(
                "store_put supplier={} index={} content_bytes={}",
                env.label(*supplier),
                stored,
                bytes.len(),
            ));
            let rating_by = env.market.chain().now() + env.market.rating_window();
            let receipt = env.market.submit(*supplier, uid, stored, rating_by)?;
            env.log_receipt(&receipt, Some(uid));
        }
    }

    if plan.rate {
        for supplier in &chosen {
            let submission = env
                .market
                .submission(uid, *supplier)
                .expect("submitted above");
            let bytes = env.store.get(&submission.store_index)?;
            let retrieved = mudfile::parse(
                core::str::from_utf8(&bytes)
                    .map_err(|e| ScenarioError::Mud(MudError::Malformed(e.to_string())))?,
            )?;
            let tier = infer_tier(&retrieved, &reference).ok_or(ScenarioError::UnknownTier {
                uid,
                supplier: *supplier,
            })?;
            let score = rate_policy(tier);
            env.line(format!(
                "retrieve supplier={} index={} tier={} score={}",
                env.label(*supplier),
                submission.store_index,
                tier,
                score,
            ));
            let receipt = env.market.rate(consumer, uid, *supplier, score)?;
            env.log_receipt(&receipt, Some(uid));
        }
    }

    Ok(uid)
}

// ---------------------------------------------------------------------------
// Scenario scripts
// ---------------------------------------------------------------------------

const ALL_SUPPLIERS: [usize; 4] = [7, 8, 9, 10];

fn script(env: &mut Env, id: ScenarioId, seed: u64) -> Result<Option<Uid>, ScenarioError> {
    let (derived, mut rng) = scenario_rng(seed, id);
    env.line(format!(
        "scenario id={} seed={} rng_seed={} summary={:?}",
        id,
        seed,
        derived,
        id.summary()
    ));
    let uid = match id {
        ScenarioId::Bs01 => Some(run_exchange(
            env,
            &mut rng,
            ExchangePlan {
                consumer: 1,
                suppliers: &[7],
                device: "amazon-echo",
                tiers: TierPlan::Fixed(&[QualityTier::Hq]),
                selection: SelectionMode::Strategy(Strategy::FirstArrival),
                submit: true,
                rate: true,
            },
        )?),
        ScenarioId::Bs02 => {
            let uid = run_exchange(
                env,
                &mut rng,
                ExchangePlan {
                    consumer: 2,
                    suppliers: &[7],
                    device: "lifx-lightbulb",
                    tiers: TierPlan::Fixed(&[QualityTier::Hq]),
                    selection: SelectionMode::Strategy(Strategy::FirstArrival),
                    submit: true,
                    rate: false,
                },
            )?;
            // The consumer stays silent; the default rating persists once the
            // built-in window lapses.
            env.advance(env.market.rating_window() + 1);
            env.sweep(2)?;
            Some(uid)
        }
        ScenarioId::Bs03 => Some(run_exchange(
            env,
            &mut rng,
            ExchangePlan {
                consumer: 3,
                suppliers: &ALL_SUPPLIERS,
                device: "samsung-camera",
                tiers: TierPlan::Fixed(&[QualityTier::Hq]),
                selection: SelectionMode::Strategy(Strategy::FirstArrival),
                submit: true,
                rate: true,
            },
        )?),
        ScenarioId::Bs04 => Some(run_exchange(
            env,
            &mut rng,
            ExchangePlan {
                consumer: 4,
                suppliers: &ALL_SUPPLIERS,
                device: "amazon-echo",
                tiers: TierPlan::ShuffledSet([QualityTier::Hq, QualityTier::Mqo, QualityTier::Lq]),
                selection: SelectionMode::Strategy(Strategy::FirstK(3)),
                submit: true,
                rate: true,
            },
        )?),
        ScenarioId::Es01 => {
            let uid = run_exchange(
                env,
                &mut rng,
                ExchangePlan {
                    consumer: 5,
                    suppliers: &ALL_SUPPLIERS,
                    device: "lifx-lightbulb",
                    tiers: TierPlan::Seeded,
                    selection: SelectionMode::Strategy(Strategy::FirstK(3)),
                    submit: false,
                    rate: false,
                },
            )?;
            env.advance(OFFER_WINDOW + 1);
            env.sweep(5)?;
            Some(uid)
        }
        ScenarioId::Es02 => Some(run_exchange(
            env,
            &mut rng,
            ExchangePlan {
                consumer: 1,
                suppliers: &ALL_SUPPLIERS,
                device: "samsung-camera",
                tiers: TierPlan::Seeded,
                selection: SelectionMode::SelectNone,
                submit: false,
                rate: false,
            },
        )?),
        ScenarioId::Es03 => {
            let uid = run_exchange(
                env,
                &mut rng,
                ExchangePlan {
                    consumer: 2,
                    suppliers: &[],
                    device: "amazon-echo",
                    tiers: TierPlan::Seeded,
                    selection: SelectionMode::Skip,
                    submit: false,
                    rate: false,
                },
            )?;
            env.advance(REQUEST_WINDOW + 1);
            env.sweep(2)?;
            Some(uid)
        }
        ScenarioId::Ss01 => Some(run_exchange(
            env,
            &mut rng,
            ExchangePlan {
                consumer: 3,
                suppliers: &ALL_SUPPLIERS,
                device: "lifx-lightbulb",
                tiers: TierPlan::Seeded,
                selection: SelectionMode::Strategy(Strategy::LargestSizeWithinBudget(3)),
                submit: true,
                rate: true,
            },
        )?),
        ScenarioId::Ss02 => Some(run_exchange(
            env,
            &mut rng,
            ExchangePlan {
                consumer: 4,
                suppliers: &ALL_SUPPLIERS,
                device: "samsung-camera",
                tiers: TierPlan::Seeded,
                selection: SelectionMode::Strategy(Strategy::LowestPriceWithinBudget(3)),
                submit: true,
                rate: true,
            },
        )?),
        ScenarioId::Ss03 => {
            // Warm-up exchange gives the suppliers distinguishable histories
            // before the measured reputation-based selection.
            env.line("warmup purpose=establish_reputations".to_string());
            run_exchange(
                env,
                &mut rng,
                ExchangePlan {
                    consumer: 6,
                    suppliers: &ALL_SUPPLIERS,
                    device: "amazon-echo",
                    tiers: TierPlan::Fixed(&[
                        QualityTier::Hq,
                        QualityTier::Hq,
                        QualityTier::Mqo,
                        QualityTier::Lq,
                    ]),
                    selection: SelectionMode::Strategy(Strategy::FirstK(4)),
                    submit: true,
                    rate: true,
                },
            )?;
            env.line("warmup done".to_string());
            Some(run_exchange(
                env,
                &mut rng,
                ExchangePlan {
                    consumer: 5,
                    suppliers: &ALL_SUPPLIERS,
                    device: "amazon-echo",
                    tiers: TierPlan::Seeded,
                    selection: SelectionMode::Strategy(Strategy::HighestReputation(3)),
                    submit: true,
                    rate: true,
                },
            )?)
        }
        ScenarioId::Vs01 => {
            for inner in &ScenarioId::ALL[..10] {
                env.line(format!("replay begin id={inner}"));
                script(env, *inner, seed)?;
                env.line(format!("replay end id={inner}"));
            }
            log_views(env);
            None
        }
    };
    Ok(uid)
}

/// VS01's read-only pass: user U6 walks the public records.
fn log_views(env: &mut Env) {
    let open = env.market.open_requests().len();
    env.line(format!("view viewer=U6 open_requests count={open}"));
    let uids: Vec<Uid> = env.market.request_records().map(|r| r.uid).collect();
    for uid in uids {
        let history = env.market.history(uid).expect("iterating known uids");
        let rated = history
            .ratings
            .iter()
            .filter(|r| matches!(r.score, Score::Explicit(_)))
            .count();
        env.line(format!(
            "view history uid={} consumer={} status={:?} offers={} submissions={} ratings={} defaults={}",
            uid,
            env.label(history.request.consumer),
            history.request.status,
            history.offers.len(),
            history.submissions.len(),
            rated,
            history.ratings.len() - rated,
        ));
    }
    for n in ALL_SUPPLIERS {
        let supplier = env.user(n);
        let history = env.market.supplier_history(supplier);
        let reputation = env
            .market
            .reputation(supplier)
            .map_or_else(|| "none".to_string(), |r| format!("{r:.2}"));
        env.line(format!(
            "view supplier=U{} offers={} submissions={} ratings={} reputation={}",
            n,
            history.offers.len(),
            history.submissions.len(),
            history.ratings.len(),
            reputation,
        ));
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

fn usage_from_chain(chain: &Chain) -> BTreeMap<Function, FunctionUsage> {
    let mut usage: BTreeMap<Function, FunctionUsage> = BTreeMap::new();
    for block in chain.blocks() {
        for tx in &block.transactions {
            let entry = usage.entry(tx.function).or_default();
            entry.calls += 1;
            entry.total_payload_bytes += tx.payload_bytes;
            entry.total_gas += tx.gas_used;
        }
    }
    usage
}

fn counts_for(market: &Marketplace, uid: Uid) -> ScenarioCounts {
    let offers = market.offers_for(uid);
    let selected = offers
        .iter()
        .filter(|o| {
            matches!(
                o.status,
                OfferStatus::Selected | OfferStatus::Submitted | OfferStatus::ExpiredUnsubmitted
            )
        })
        .count() as u32;
    let history = market.history(uid).expect("measured uid exists");
    let rated = history
        .ratings
        .iter()
        .filter(|r| matches!(r.score, Score::Explicit(_)))
        .count() as u32;
    ScenarioCounts {
        offers: offers.len() as u32,
        selected,
        submitted: history.submissions.len() as u32,
        rated,
    }
}

/// Runs one scenario from a fresh genesis and returns its report.
pub fn run_scenario(id: ScenarioId, seed: u64) -> Result<ScenarioReport, ScenarioError> {
    let mut env = Env::fresh()?;
    env.line(format!(
        "genesis accounts={} balance_wei={} preset=paper gas_per_eth={} rating_window={}",
        GENESIS_ACCOUNTS,
        GENESIS_BALANCE,
        env.market.schedule().gas_per_eth,
        env.market.rating_window(),
    ));
    let measured = script(&mut env, id, seed)?;

    let counts = measured.map(|uid| counts_for(&env.market, uid));
    if let Some(c) = &counts {
        env.line(format!(
            "counts offers={} selected={} submitted={} rated={}",
            c.offers, c.selected, c.submitted, c.rated
        ));
    }

    let mut ratings_given = Vec::new();
    let mut tiers_submitted = Vec::new();
    let mut device = None;
    if let Some(uid) = measured {
        let history = env.market.history(uid).expect("measured uid exists");
        device = env
            .catalog
            .match_device(&history.request.device)
            .map(|e| e.key.to_string());
        for rating in &history.ratings {
            if let Score::Explicit(score) = rating.score {
                ratings_given.push((env.label(rating.supplier), score));
            }
        }
        let reference = env
            .catalog
            .match_device(&history.request.device)
            .map(|e| e.profile.clone());
        for submission in &history.submissions {
            if let (Ok(bytes), Some(reference)) =
                (env.store.get(&submission.store_index), reference.as_ref())
            {
                let tier = core::str::from_utf8(&bytes)
                    .ok()
                    .and_then(|text| mudfile::parse(text).ok())
                    .and_then(|profile| infer_tier(&profile, reference));
                if let Some(tier) = tier {
                    tiers_submitted.push((env.label(submission.supplier), tier.to_string()));
                }
            }
        }
    }

    let mut final_balances: Vec<(String, u128)> = Vec::new();
    for (i, account) in env.market.chain().accounts().iter().enumerate() {
        final_balances.push((format!("U{}", i + 1), account.balance));
    }
    final_balances.push((
        "fee_sink".to_string(),
        env.market.chain().fee_sink().balance,
    ));
    for (label, balance) in &final_balances {
        env.line(format!("balance {label}={balance}"));
    }
    let escrow_total = env.market.escrow().total();
    env.line(format!("escrow total={escrow_total}"));

    let usage = if id == ScenarioId::Vs01 {
        BTreeMap::new()
    } else {
        usage_from_chain(env.market.chain())
    };

    let mut transcript = env.transcript.join("\n");
    transcript.push('\n');
    let transcript_digest = digest(transcript.as_bytes()).to_string();
    transcript.push_str(&format!("digest sha256={transcript_digest}\n"));

    Ok(ScenarioReport {
        id,
        seed,
        device,
        counts,
        usage,
        ratings_given,
        tiers_submitted,
        final_balances,
        escrow_total,
        transcript,
        transcript_digest,
    })
}

/// Runs all eleven scenarios, each from its own fresh genesis.
pub fn run_all(seed: u64) -> Result<Vec<ScenarioReport>, ScenarioError> {
    ScenarioId::ALL
        .into_iter()
        .map(|id| run_scenario(id, seed))
        .collect()
}
