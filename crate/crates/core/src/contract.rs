//! The MUD-exchange state machine: request, offer, select, submit, rate, plus
//! the deadline-driven expiry sweep.
//!
//! Payment protocol: the consumer's Ether moves into escrow when offers are
//! selected, is released to the supplier when the data index is submitted, and
//! is refunded to the consumer when the submission window expires. Every
//! record is publicly readable; the ledger's conservation invariant extends
//! over the escrow held here.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::canon;
use crate::hexid::{self, ParseIdError};
use crate::ledger::{Address, Chain, Function, GasSchedule, LedgerError, TxReceipt};
use crate::offstore::StoreIndex;

/// Rating window built into the contract: 7 simulated days after submission.
pub const DEFAULT_RATING_WINDOW: u64 = 7 * 86_400;

/// Consumer-side description of the device whose MUD data is requested.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub manufacturer: String,
    pub device_name: String,
    pub model: String,
    pub firmware: String,
    /// Optional CPE 2.3 name (13 colon-separated components).
    pub cpe: Option<String>,
}

impl DeviceSpec {
    pub fn new(
        manufacturer: &str,
        device_name: &str,
        model: &str,
        firmware: &str,
        cpe: Option<&str>,
    ) -> Result<Self, ContractError> {
        let spec = Self {
            manufacturer: manufacturer.into(),
            device_name: device_name.into(),
            model: model.into(),
            firmware: firmware.into(),
            cpe: cpe.map(Into::into),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ContractError> {
        if self.manufacturer.is_empty()
            && self.device_name.is_empty()
            && self.model.is_empty()
            && self.firmware.is_empty()
            && self.cpe.as_deref().is_none_or(str::is_empty)
        {
            return Err(ContractError::InvalidDevice(
                "at least one device field must be non-empty".into(),
            ));
        }
        if let Some(cpe) = &self.cpe {
            let parts: Vec<&str> = cpe.split(':').collect();
            if parts.len() != 13 || parts[0] != "cpe" || parts[1] != "2.3" {
                return Err(ContractError::InvalidDevice(format!(
                    "`{cpe}` is not a CPE 2.3 name"
                )));
            }
        }
        Ok(())
    }
}

/// 256-bit request identifier: the hash of the current block timestamp
/// concatenated with the consumer's address.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Uid([u8; 32]);

impl Uid {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for Uid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for Uid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Uid({self})")
    }
}

impl FromStr for Uid {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        hexid::parse_fixed::<32>("uid", s).map(Self)
    }
}

impl Serialize for Uid {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Uid {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Computes `hash(big-endian 8-byte timestamp || 20-byte consumer address)`,
/// with an incrementing 1-byte nonce appended on collision.
fn uid_digest(timestamp: u64, consumer: Address, nonce: Option<u8>) -> Uid {
    let mut hasher = Sha256::new();
    hasher.update(timestamp.to_be_bytes());
    hasher.update(consumer.as_bytes());
    if let Some(nonce) = nonce {
        hasher.update([nonce]);
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    Uid(bytes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Open,
    Selecting,
    Closed,
    Expired,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OfferStatus {
    Pending,
    Selected,
    Submitted,
    ExpiredUnselected,
    ExpiredUnsubmitted,
}

impl OfferStatus {
    /// Whether an offer that was selected has reached its terminal state.
    pub fn is_terminal(self) -> bool {
        !matches!(self, OfferStatus::Pending | OfferStatus::Selected)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub uid: Uid,
    pub consumer: Address,
    pub device: DeviceSpec,
    pub budget: u128,
    pub deadline: u64,
    pub created_at: u64,
    pub status: RequestStatus,
}

/// Supplier-declared offer metadata (quantifiable data points only — the MUD
/// content itself is never inspected before approval).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfferMeta {
    pub ace_count: u32,
    pub file_size_kb: f64,
    pub flow_scope: String,
    pub network_setting: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfferRecord {
    pub request_uid: Uid,
    pub supplier: Address,
    pub ace_count: u32,
    pub file_size_kb: f64,
    pub flow_scope: String,
    pub network_setting: String,
    pub price: u128,
    pub deadline: u64,
    pub created_at: u64,
    /// Arrival order on chain.
    pub block_number: u64,
    /// Priced above the request's advisory budget.
    pub over_budget: bool,
    pub status: OfferStatus,
    /// Set when the offer is selected: selection time plus the offer's
    /// declared deadline duration.
    pub submit_deadline: Option<u64>,
}

impl OfferRecord {
    /// Declared deadline duration: how long the offer stays decidable, and
    /// the length of the submission window once selected.
    pub fn window(&self) -> u64 {
        self.deadline - self.created_at
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub request_uid: Uid,
    pub supplier: Address,
    pub store_index: StoreIndex,
    pub submitted_at: u64,
    /// Deadline parameter passed to `submit`, recorded verbatim.
    pub declared_deadline: u64,
    /// End of the built-in rating window.
    pub rating_deadline: u64,
}

/// A rating score: explicit 0–100, or the default sentinel that persists when
/// the consumer lets the rating window lapse. Defaults are excluded from
/// reputation aggregation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    Explicit(u8),
    Default,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub request_uid: Uid,
    pub supplier: Address,
    pub score: Score,
}

/// Contract-held consumer payments, keyed by `(request, supplier)`. Every
/// entry leaves exactly once: released to the supplier at submission or
/// refunded to the consumer at expiry.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EscrowLedger {
    held: BTreeMap<(Uid, Address), u128>,
}

impl EscrowLedger {
    pub fn held(&self) -> &BTreeMap<(Uid, Address), u128> {
        &self.held
    }

    pub fn total(&self) -> u128 {
        self.held.values().sum()
    }

    pub fn amount(&self, uid: Uid, supplier: Address) -> Option<u128> {
        self.held.get(&(uid, supplier)).copied()
    }

    fn hold(&mut self, uid: Uid, supplier: Address, amount: u128) {
        let previous = self.held.insert((uid, supplier), amount);
        debug_assert!(previous.is_none(), "escrow entry already held");
    }

    fn take(&mut self, uid: Uid, supplier: Address) -> u128 {
        self.held
            .remove(&(uid, supplier))
            .expect("escrow entry exists for selected offer")
    }
}

/// One state change applied by the expiry sweep.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transition {
    RequestExpired {
        uid: Uid,
    },
    OfferExpiredUnselected {
        uid: Uid,
        supplier: Address,
    },
    OfferExpiredUnsubmitted {
        uid: Uid,
        supplier: Address,
        refund_wei: u128,
    },
    DefaultRating {
        uid: Uid,
        supplier: Address,
    },
    RequestClosed {
        uid: Uid,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContractError {
    Ledger(LedgerError),
    InvalidDevice(String),
    /// Deadline not in the future.
    PastDeadline {
        deadline: u64,
        now: u64,
    },
    UnknownRequest(Uid),
    RequestNotOpen {
        uid: Uid,
        status: RequestStatus,
    },
    RequestDeadlinePassed {
        uid: Uid,
    },
    SelfDealing {
        uid: Uid,
        supplier: Address,
    },
    DuplicateOffer {
        uid: Uid,
        supplier: Address,
    },
    NotConsumer {
        uid: Uid,
        caller: Address,
    },
    UnknownOffer {
        uid: Uid,
        supplier: Address,
    },
    OfferNotSelectable {
        uid: Uid,
        supplier: Address,
        status: OfferStatus,
    },
    OfferDeadlinePassed {
        uid: Uid,
        supplier: Address,
    },
    DuplicateSupplier(Address),
    NotSelected {
        uid: Uid,
        supplier: Address,
    },
    AlreadySubmitted {
        uid: Uid,
        supplier: Address,
    },
    SubmitWindowClosed {
        uid: Uid,
        supplier: Address,
    },
    NoSubmission {
        uid: Uid,
        supplier: Address,
    },
    RatingWindowClosed {
        uid: Uid,
        supplier: Address,
    },
    AlreadyRated {
        uid: Uid,
        supplier: Address,
    },
    InvalidScore(u8),
    /// 255 same-timestamp collisions for one consumer; practically unreachable.
    UidSpaceExhausted,
}

impl fmt::Display for ContractError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContractError::Ledger(e) => write!(f, "{e}"),
            ContractError::InvalidDevice(msg) => write!(f, "invalid device spec: {msg}"),
            ContractError::PastDeadline { deadline, now } => {
                write!(f, "deadline {deadline} is not after current time {now}")
            }
            ContractError::UnknownRequest(uid) => write!(f, "unknown request {uid}"),
            ContractError::RequestNotOpen { uid, status } => {
                write!(f, "request {uid} is not open (status {status:?})")
            }
            ContractError::RequestDeadlinePassed { uid } => {
                write!(f, "request {uid} deadline has passed")
            }
            ContractError::SelfDealing { uid, supplier } => {
                write!(f, "supplier {supplier} is the consumer of request {uid}")
            }
            ContractError::DuplicateOffer { uid, supplier } => {
                write!(f, "supplier {supplier} already offered on request {uid}")
            }
            ContractError::NotConsumer { uid, caller } => {
                write!(f, "{caller} is not the consumer of request {uid}")
            }
            ContractError::UnknownOffer { uid, supplier } => {
                write!(f, "no offer from {supplier} on request {uid}")
            }
            ContractError::OfferNotSelectable {
                uid,
                supplier,
                status,
            } => write!(
                f,
                "offer from {supplier} on request {uid} is not selectable (status {status:?})"
            ),
            ContractError::OfferDeadlinePassed { uid, supplier } => {
                write!(f, "offer from {supplier} on request {uid} has expired")
            }
            ContractError::DuplicateSupplier(supplier) => {
                write!(f, "supplier {supplier} named twice in selection")
            }
            ContractError::NotSelected { uid, supplier } => {
                write!(f, "offer from {supplier} on request {uid} is not selected")
            }
            ContractError::AlreadySubmitted { uid, supplier } => {
                write!(f, "supplier {supplier} already submitted for request {uid}")
            }
            ContractError::SubmitWindowClosed { uid, supplier } => {
                write!(
                    f,
                    "submission window closed for {supplier} on request {uid}"
                )
            }
            ContractError::NoSubmission { uid, supplier } => {
                write!(f, "no submission from {supplier} on request {uid}")
            }
            ContractError::RatingWindowClosed { uid, supplier } => {
                write!(f, "rating window closed for {supplier} on request {uid}")
            }
            ContractError::AlreadyRated { uid, supplier } => {
                write!(f, "supplier {supplier} already rated on request {uid}")
            }
            ContractError::InvalidScore(score) => {
                write!(f, "score {score} is outside 0..=100")
            }
            ContractError::UidSpaceExhausted => write!(f, "uid nonce space exhausted"),
        }
    }
}

impl core::error::Error for ContractError {}

impl From<LedgerError> for ContractError {
    fn from(e: LedgerError) -> Self {
        ContractError::Ledger(e)
    }
}

/// Wei amounts inside tagged call records travel as decimal strings: exact,
/// and safe for JSON tooling that reads numbers as doubles.
mod wei_string {
    use alloc::string::{String, ToString};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &u128, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&value.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<u128, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A contract call with its arguments, as recorded in journals and replays.
/// The sender travels in the transaction envelope, not here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "lowercase")]
pub enum ContractCall {
    Request {
        device: DeviceSpec,
        #[serde(with = "wei_string")]
        budget: u128,
        deadline: u64,
    },
    Offer {
        uid: Uid,
        ace_count: u32,
        file_size_kb: f64,
        flow_scope: String,
        network_setting: String,
        #[serde(with = "wei_string")]
        price: u128,
        deadline: u64,
    },
    Select {
        uid: Uid,
        suppliers: Vec<Address>,
    },
    Submit {
        uid: Uid,
        index: StoreIndex,
        deadline: u64,
    },
    Rate {
        uid: Uid,
        supplier: Address,
        score: u8,
    },
    Expire,
}

/// What a committed call produced.
#[derive(Clone, Debug, PartialEq)]
pub enum CallOutcome {
    Requested {
        uid: Uid,
        receipt: TxReceipt,
    },
    Committed {
        receipt: TxReceipt,
    },
    Swept {
        transitions: Vec<Transition>,
        receipt: Option<TxReceipt>,
    },
}

impl CallOutcome {
    pub fn receipt(&self) -> Option<&TxReceipt> {
        match self {
            CallOutcome::Requested { receipt, .. } | CallOutcome::Committed { receipt } => {
                Some(receipt)
            }
            CallOutcome::Swept { receipt, .. } => receipt.as_ref(),
        }
    }
}

/// Read-only queries over the public records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViewQuery {
    OpenRequests,
    OffersFor(Uid),
    History(Uid),
    SupplierHistory(Address),
    Reputation(Address),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "view", rename_all = "snake_case")]
pub enum ViewResult {
    OpenRequests(Vec<RequestRecord>),
    Offers(Vec<OfferRecord>),
    History(Option<Box<RequestHistory>>),
    SupplierHistory(SupplierHistory),
    Reputation(Option<f64>),
}

/// Everything recorded about one request.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RequestHistory {
    pub request: RequestRecord,
    pub offers: Vec<OfferRecord>,
    pub submissions: Vec<SubmissionRecord>,
    pub ratings: Vec<RatingRecord>,
}

/// Everything recorded about one supplier.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupplierHistory {
    pub offers: Vec<OfferRecord>,
    pub submissions: Vec<SubmissionRecord>,
    pub ratings: Vec<RatingRecord>,
}

/// The exchange contract plus the chain it settles on. All mutations run
/// through the ledger's serialized commit sequence; a rejected call leaves
/// every piece of state untouched.
#[derive(Clone, Debug, PartialEq)]
pub struct Marketplace {
    chain: Chain,
    schedule: GasSchedule,
    rating_window: u64,
    requests: BTreeMap<Uid, RequestRecord>,
    offers: BTreeMap<Uid, Vec<OfferRecord>>,
    submissions: BTreeMap<(Uid, Address), SubmissionRecord>,
    ratings: BTreeMap<(Uid, Address), RatingRecord>,
    escrow: EscrowLedger,
}

impl Marketplace {
    pub fn new(chain: Chain, schedule: GasSchedule) -> Self {
        Self::with_rating_window(chain, schedule, DEFAULT_RATING_WINDOW)
    }

    pub fn with_rating_window(chain: Chain, schedule: GasSchedule, rating_window: u64) -> Self {
        Self {
            chain,
            schedule,
            rating_window,
            requests: BTreeMap::new(),
            offers: BTreeMap::new(),
            submissions: BTreeMap::new(),
            ratings: BTreeMap::new(),
            escrow: EscrowLedger::default(),
        }
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn schedule(&self) -> &GasSchedule {
        &self.schedule
    }

    pub fn rating_window(&self) -> u64 {
        self.rating_window
    }

    pub fn escrow(&self) -> &EscrowLedger {
        &self.escrow
    }

    pub fn advance_time(&mut self, seconds: u64) {
        self.chain.advance_time(seconds);
    }

    /// Total wei across accounts, fee sink, and escrow. Always equals the
    /// genesis supply.
    pub fn total_wei(&self) -> u128 {
        self.chain.total_account_wei() + self.escrow.total()
    }

    fn next_uid(&self, consumer: Address) -> Result<Uid, ContractError> {
        let timestamp = self.chain.now();
        let uid = uid_digest(timestamp, consumer, None);
        if !self.requests.contains_key(&uid) {
            return Ok(uid);
        }
        for nonce in 1..=u8::MAX {
            let uid = uid_digest(timestamp, consumer, Some(nonce));
            if !self.requests.contains_key(&uid) {
                return Ok(uid);
            }
        }
        Err(ContractError::UidSpaceExhausted)
    }

    /// Publishes a MUD data request. Returns the request UID with the receipt.
    pub fn request(
        &mut self,
        consumer: Address,
        device: DeviceSpec,
        budget: u128,
        deadline: u64,
    ) -> Result<(Uid, TxReceipt), ContractError> {
        device.validate()?;
        let now = self.chain.now();
        if deadline <= now {
            return Err(ContractError::PastDeadline { deadline, now });
        }
        let uid = self.next_uid(consumer)?;
        let payload = canon::encoded_len(&[
            &device.manufacturer,
            &device.device_name,
            &device.model,
            &device.firmware,
            device.cpe.as_deref().unwrap_or(""),
            &budget.to_string(),
            &deadline.to_string(),
        ]);
        let receipt = self
            .chain
            .apply_tx(consumer, Function::Request, payload, &self.schedule)?;
        self.requests.insert(
            uid,
            RequestRecord {
                uid,
                consumer,
                device,
                budget,
                deadline,
                created_at: now,
                status: RequestStatus::Open,
            },
        );
        self.offers.insert(uid, Vec::new());
        Ok((uid, receipt))
    }

    /// Presents a single offer on an open request.
    pub fn offer(
        &mut self,
        supplier: Address,
        uid: Uid,
        meta: OfferMeta,
        price: u128,
        deadline: u64,
    ) -> Result<TxReceipt, ContractError> {
        let now = self.chain.now();
        let request = self
            .requests
            .get(&uid)
            .ok_or(ContractError::UnknownRequest(uid))?;
        if request.status != RequestStatus::Open {
            return Err(ContractError::RequestNotOpen {
                uid,
                status: request.status,
            });
        }
        if request.deadline < now {
            return Err(ContractError::RequestDeadlinePassed { uid });
        }
        if request.consumer == supplier {
            return Err(ContractError::SelfDealing { uid, supplier });
        }
        let offers = self
            .offers
            .get(&uid)
            .expect("offer list exists per request");
        if offers.iter().any(|o| o.supplier == supplier) {
            return Err(ContractError::DuplicateOffer { uid, supplier });
        }
        if deadline <= now {
            return Err(ContractError::PastDeadline { deadline, now });
        }
        let payload = canon::encoded_len(&[
            &uid.to_string(),
            &meta.ace_count.to_string(),
            &format!("{:.3}", meta.file_size_kb),
            &meta.flow_scope,
            &meta.network_setting,
            &price.to_string(),
            &deadline.to_string(),
        ]);
        let over_budget = price > request.budget;
        let receipt = self
            .chain
            .apply_tx(supplier, Function::Offer, payload, &self.schedule)?;
        self.offers
            .get_mut(&uid)
            .expect("checked above")
            .push(OfferRecord {
                request_uid: uid,
                supplier,
                ace_count: meta.ace_count,
                file_size_kb: meta.file_size_kb,
                flow_scope: meta.flow_scope,
                network_setting: meta.network_setting,
                price,
                deadline,
                created_at: now,
                block_number: receipt.block_number,
                over_budget,
                status: OfferStatus::Pending,
                submit_deadline: None,
            });
        Ok(receipt)
    }

    /// Approves zero or more pending offers, moving their combined price from
    /// the consumer into escrow. Atomic: all selections commit or none do.
    /// Each request accepts exactly one select call.
    pub fn select(
        &mut self,
        consumer: Address,
        uid: Uid,
        suppliers: &[Address],
    ) -> Result<TxReceipt, ContractError> {
        let now = self.chain.now();
        let request = self
            .requests
            .get(&uid)
            .ok_or(ContractError::UnknownRequest(uid))?;
        if request.consumer != consumer {
            return Err(ContractError::NotConsumer {
                uid,
                caller: consumer,
            });
        }
        if request.status != RequestStatus::Open {
            return Err(ContractError::RequestNotOpen {
                uid,
                status: request.status,
            });
        }
        let mut seen = BTreeSet::new();
        for supplier in suppliers {
            if !seen.insert(*supplier) {
                return Err(ContractError::DuplicateSupplier(*supplier));
            }
        }
        let offers = self
            .offers
            .get(&uid)
            .expect("offer list exists per request");
        let mut ordered: Vec<(u64, Address, u128, u64)> = Vec::with_capacity(suppliers.len());
        let mut total_price = 0u128;
        for supplier in suppliers {
            let offer = offers.iter().find(|o| o.supplier == *supplier).ok_or(
                ContractError::UnknownOffer {
                    uid,
                    supplier: *supplier,
                },
            )?;
            if offer.status != OfferStatus::Pending {
                return Err(ContractError::OfferNotSelectable {
                    uid,
                    supplier: *supplier,
                    status: offer.status,
                });
            }
            if offer.deadline < now {
                return Err(ContractError::OfferDeadlinePassed {
                    uid,
                    supplier: *supplier,
                });
            }
            ordered.push((offer.block_number, *supplier, offer.price, offer.window()));
            total_price += offer.price;
        }
        // Canonical argument order is arrival order: block number, then address.
        ordered.sort_unstable_by_key(|&(block, supplier, _, _)| (block, supplier));
        let joined = ordered
            .iter()
            .map(|(_, supplier, _, _)| supplier.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let payload = canon::encoded_len(&[&uid.to_string(), &joined]);
        let gas = self.schedule.gas_for(Function::Select, payload);
        let fee = self.schedule.fee_wei(gas);
        let available = self.chain.balance(consumer)?;
        let needed = fee + total_price;
        if available < needed {
            return Err(ContractError::Ledger(LedgerError::InsufficientFunds {
                address: consumer,
                needed,
                available,
            }));
        }
        let receipt = self
            .chain
            .apply_tx(consumer, Function::Select, payload, &self.schedule)?;
        for (_, supplier, price, window) in &ordered {
            self.chain
                .debit(consumer, *price)
                .expect("funds checked above");
            self.escrow.hold(uid, *supplier, *price);
            let offer = self
                .offers
                .get_mut(&uid)
                .expect("checked above")
                .iter_mut()
                .find(|o| o.supplier == *supplier)
                .expect("offer existence checked above");
            offer.status = OfferStatus::Selected;
            offer.submit_deadline = Some(now + window);
        }
        let request = self.requests.get_mut(&uid).expect("checked above");
        request.status = if suppliers.is_empty() {
            RequestStatus::Closed
        } else {
            RequestStatus::Selecting
        };
        Ok(receipt)
    }

    /// Shares the store index of the MUD data, releasing the escrowed price
    /// to the supplier and opening the rating window.
    pub fn submit(
        &mut self,
        supplier: Address,
        uid: Uid,
        index: StoreIndex,
        deadline: u64,
    ) -> Result<TxReceipt, ContractError> {
        let now = self.chain.now();
        if !self.requests.contains_key(&uid) {
            return Err(ContractError::UnknownRequest(uid));
        }
        let offer = self
            .offers
            .get(&uid)
            .expect("offer list exists per request")
            .iter()
            .find(|o| o.supplier == supplier)
            .ok_or(ContractError::UnknownOffer { uid, supplier })?;
        match offer.status {
            OfferStatus::Submitted => {
                return Err(ContractError::AlreadySubmitted { uid, supplier })
            }
            OfferStatus::Selected => {}
            _ => return Err(ContractError::NotSelected { uid, supplier }),
        }
        let submit_deadline = offer.submit_deadline.expect("set at selection");
        if submit_deadline < now {
            return Err(ContractError::SubmitWindowClosed { uid, supplier });
        }
        let payload =
            canon::encoded_len(&[&uid.to_string(), &index.to_string(), &deadline.to_string()]);
        let receipt = self
            .chain
            .apply_tx(supplier, Function::Submit, payload, &self.schedule)?;
        let price = self.escrow.take(uid, supplier);
        self.chain
            .credit(supplier, price)
            .expect("supplier account exists");
        self.offers
            .get_mut(&uid)
            .expect("checked above")
            .iter_mut()
            .find(|o| o.supplier == supplier)
            .expect("checked above")
            .status = OfferStatus::Submitted;
        self.submissions.insert(
            (uid, supplier),
            SubmissionRecord {
                request_uid: uid,
                supplier,
                store_index: index,
                submitted_at: now,
                declared_deadline: deadline,
                rating_deadline: now + self.rating_window,
            },
        );
        self.close_if_settled(uid);
        Ok(receipt)
    }

    /// Rates a supplier's submission within the built-in rating window.
    pub fn rate(
        &mut self,
        consumer: Address,
        uid: Uid,
        supplier: Address,
        score: u8,
    ) -> Result<TxReceipt, ContractError> {
        let now = self.chain.now();
        let request = self
            .requests
            .get(&uid)
            .ok_or(ContractError::UnknownRequest(uid))?;
        if request.consumer != consumer {
            return Err(ContractError::NotConsumer {
                uid,
                caller: consumer,
            });
        }
        if score > 100 {
            return Err(ContractError::InvalidScore(score));
        }
        let submission = self
            .submissions
            .get(&(uid, supplier))
            .ok_or(ContractError::NoSubmission { uid, supplier })?;
        if submission.rating_deadline < now {
            return Err(ContractError::RatingWindowClosed { uid, supplier });
        }
        if self.ratings.contains_key(&(uid, supplier)) {
            return Err(ContractError::AlreadyRated { uid, supplier });
        }
        let payload =
            canon::encoded_len(&[&uid.to_string(), &supplier.to_string(), &score.to_string()]);
        let receipt = self
            .chain
            .apply_tx(consumer, Function::Rate, payload, &self.schedule)?;
        self.ratings.insert(
            (uid, supplier),
            RatingRecord {
                request_uid: uid,
                supplier,
                score: Score::Explicit(score),
            },
        );
        Ok(receipt)
    }

    /// Deadline sweep: expires unselected requests, retires dead offers,
    /// refunds escrow for missed submissions, and writes default ratings for
    /// lapsed rating windows. Idempotent; commits a zero-gas transaction only
    /// when at least one transition fires.
    pub fn expire(
        &mut self,
        sweeper: Address,
    ) -> Result<(Vec<Transition>, Option<TxReceipt>), ContractError> {
        if !self.chain.has_account(sweeper) {
            return Err(ContractError::Ledger(LedgerError::UnknownAccount(sweeper)));
        }
        let now = self.chain.now();
        let mut transitions = Vec::new();

        // Open requests whose deadline passed without any selection.
        let expired_requests: Vec<Uid> = self
            .requests
            .values()
            .filter(|r| r.status == RequestStatus::Open && r.deadline < now)
            .map(|r| r.uid)
            .collect();
        for uid in &expired_requests {
            self.requests.get_mut(uid).expect("collected above").status = RequestStatus::Expired;
            transitions.push(Transition::RequestExpired { uid: *uid });
        }

        // Offers: pending ones die with their own deadline or their request;
        // selected ones past the submission window refund the consumer.
        let uids: Vec<Uid> = self.offers.keys().copied().collect();
        for uid in uids {
            let request_status = self.requests[&uid].status;
            let consumer = self.requests[&uid].consumer;
            let offers = self.offers.get_mut(&uid).expect("keyed above");
            let mut refunds = 0u128;
            for offer in offers.iter_mut() {
                match offer.status {
                    OfferStatus::Pending
                        if offer.deadline < now || request_status != RequestStatus::Open =>
                    {
                        offer.status = OfferStatus::ExpiredUnselected;
                        transitions.push(Transition::OfferExpiredUnselected {
                            uid,
                            supplier: offer.supplier,
                        });
                    }
                    OfferStatus::Selected
                        if offer.submit_deadline.expect("set at selection") < now =>
                    {
                        offer.status = OfferStatus::ExpiredUnsubmitted;
                        let refund = self.escrow.take(uid, offer.supplier);
                        refunds += refund;
                        transitions.push(Transition::OfferExpiredUnsubmitted {
                            uid,
                            supplier: offer.supplier,
                            refund_wei: refund,
                        });
                    }
                    _ => {}
                }
            }
            if refunds > 0 {
                self.chain
                    .credit(consumer, refunds)
                    .expect("consumer account exists");
            }
        }

        // Lapsed rating windows keep the default value.
        let lapsed: Vec<(Uid, Address)> = self
            .submissions
            .iter()
            .filter(|((uid, supplier), s)| {
                s.rating_deadline < now && !self.ratings.contains_key(&(*uid, *supplier))
            })
            .map(|(key, _)| *key)
            .collect();
        for (uid, supplier) in lapsed {
            self.ratings.insert(
                (uid, supplier),
                RatingRecord {
                    request_uid: uid,
                    supplier,
                    score: Score::Default,
                },
            );
            transitions.push(Transition::DefaultRating { uid, supplier });
        }

        // Requests whose selections have all settled.
        let selecting: Vec<Uid> = self
            .requests
            .values()
            .filter(|r| r.status == RequestStatus::Selecting)
            .map(|r| r.uid)
            .collect();
        for uid in selecting {
            if self.close_if_settled(uid) {
                transitions.push(Transition::RequestClosed { uid });
            }
        }

        if transitions.is_empty() {
            return Ok((transitions, None));
        }
        let receipt = self
            .chain
            .apply_tx(sweeper, Function::Expire, 0, &self.schedule)?;
        Ok((transitions, Some(receipt)))
    }

    /// Closes a selecting request once no selected offer remains outstanding.
    fn close_if_settled(&mut self, uid: Uid) -> bool {
        let request = self.requests.get(&uid).expect("caller passes known uid");
        if request.status != RequestStatus::Selecting {
            return false;
        }
        let outstanding = self.offers[&uid]
            .iter()
            .any(|o| o.status == OfferStatus::Selected);
        if outstanding {
            return false;
        }
        self.requests.get_mut(&uid).expect("known uid").status = RequestStatus::Closed;
        true
    }

    /// Executes a recorded call; the single entry point used by journals and
    /// the scenario runner's replay path.
    pub fn execute(
        &mut self,
        sender: Address,
        call: ContractCall,
    ) -> Result<CallOutcome, ContractError> {
        match call {
            ContractCall::Request {
                device,
                budget,
                deadline,
            } => {
                let (uid, receipt) = self.request(sender, device, budget, deadline)?;
                Ok(CallOutcome::Requested { uid, receipt })
            }
            ContractCall::Offer {
                uid,
                ace_count,
                file_size_kb,
                flow_scope,
                network_setting,
                price,
                deadline,
            } => {
                let meta = OfferMeta {
                    ace_count,
                    file_size_kb,
                    flow_scope,
                    network_setting,
                };
                let receipt = self.offer(sender, uid, meta, price, deadline)?;
                Ok(CallOutcome::Committed { receipt })
            }
            ContractCall::Select { uid, suppliers } => {
                let receipt = self.select(sender, uid, &suppliers)?;
                Ok(CallOutcome::Committed { receipt })
            }
            ContractCall::Submit {
                uid,
                index,
                deadline,
            } => {
                let receipt = self.submit(sender, uid, index, deadline)?;
                Ok(CallOutcome::Committed { receipt })
            }
            ContractCall::Rate {
                uid,
                supplier,
                score,
            } => {
                let receipt = self.rate(sender, uid, supplier, score)?;
                Ok(CallOutcome::Committed { receipt })
            }
            ContractCall::Expire => {
                let (transitions, receipt) = self.expire(sender)?;
                Ok(CallOutcome::Swept {
                    transitions,
                    receipt,
                })
            }
        }
    }

    // ---- views: all records are public ----

    pub fn open_requests(&self) -> Vec<&RequestRecord> {
        self.requests
            .values()
            .filter(|r| r.status == RequestStatus::Open)
            .collect()
    }

    pub fn request_record(&self, uid: Uid) -> Option<&RequestRecord> {
        self.requests.get(&uid)
    }

    pub fn request_records(&self) -> impl Iterator<Item = &RequestRecord> {
        self.requests.values()
    }

    pub fn offers_for(&self, uid: Uid) -> &[OfferRecord] {
        self.offers.get(&uid).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn submission(&self, uid: Uid, supplier: Address) -> Option<&SubmissionRecord> {
        self.submissions.get(&(uid, supplier))
    }

    pub fn rating(&self, uid: Uid, supplier: Address) -> Option<&RatingRecord> {
        self.ratings.get(&(uid, supplier))
    }

    pub fn history(&self, uid: Uid) -> Option<RequestHistory> {
        let request = self.requests.get(&uid)?.clone();
        Some(RequestHistory {
            request,
            offers: self.offers_for(uid).to_vec(),
            submissions: self
                .submissions
                .range((uid, Address::from_bytes([0; 20]))..=(uid, Address::from_bytes([0xFF; 20])))
                .map(|(_, s)| s.clone())
                .collect(),
            ratings: self
                .ratings
                .range((uid, Address::from_bytes([0; 20]))..=(uid, Address::from_bytes([0xFF; 20])))
                .map(|(_, r)| r.clone())
                .collect(),
        })
    }

    pub fn supplier_history(&self, supplier: Address) -> SupplierHistory {
        SupplierHistory {
            offers: self
                .offers
                .values()
                .flatten()
                .filter(|o| o.supplier == supplier)
                .cloned()
                .collect(),
            submissions: self
                .submissions
                .values()
                .filter(|s| s.supplier == supplier)
                .cloned()
                .collect(),
            ratings: self
                .ratings
                .values()
                .filter(|r| r.supplier == supplier)
                .cloned()
                .collect(),
        }
    }

    /// Arithmetic mean of the supplier's explicit scores, or `None` if it has
    /// never been explicitly rated. Default ratings are excluded.
    pub fn reputation(&self, supplier: Address) -> Option<f64> {
        let scores: Vec<u8> = self
            .ratings
            .values()
            .filter(|r| r.supplier == supplier)
            .filter_map(|r| match r.score {
                Score::Explicit(score) => Some(score),
                Score::Default => None,
            })
            .collect();
        if scores.is_empty() {
            return None;
        }
        Some(scores.iter().map(|&s| s as u64).sum::<u64>() as f64 / scores.len() as f64)
    }

    pub fn view(&self, query: &ViewQuery) -> ViewResult {
        match query {
            ViewQuery::OpenRequests => {
                ViewResult::OpenRequests(self.open_requests().into_iter().cloned().collect())
            }
            ViewQuery::OffersFor(uid) => ViewResult::Offers(self.offers_for(*uid).to_vec()),
            ViewQuery::History(uid) => ViewResult::History(self.history(*uid).map(Box::new)),
            ViewQuery::SupplierHistory(addr) => {
                ViewResult::SupplierHistory(self.supplier_history(*addr))
            }
            ViewQuery::Reputation(addr) => ViewResult::Reputation(self.reputation(*addr)),
        }
    }
}
