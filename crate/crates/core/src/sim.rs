//! Test support (feature `testutil`): a byte-tape-driven operation fuzzer
//! with invariant tracking.
//!
//! A tape of arbitrary bytes decodes to a sequence of contract operations,
//! some valid and some deliberately not. After every step the harness checks
//! that wei conservation holds exactly, that offers only ever traverse legal
//! state edges, that escrow equals the sum of outstanding selected prices,
//! and that rejected operations left the marketplace bit-identical.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::contract::{ContractError, DeviceSpec, Marketplace, OfferMeta, OfferStatus, Uid};
use crate::ledger::{Address, Chain, GasSchedule, WEI_PER_ETH};
use crate::offstore::digest;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantViolation(pub String);

impl core::fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "invariant violation: {}", self.0)
    }
}

pub struct Harness {
    pub market: Marketplace,
    supply: u128,
    statuses: BTreeMap<(Uid, Address), OfferStatus>,
    pub ops_applied: usize,
    pub ops_rejected: usize,
}

fn legal_edge(from: OfferStatus, to: OfferStatus) -> bool {
    use OfferStatus::*;
    matches!(
        (from, to),
        (Pending, Selected)
            | (Pending, ExpiredUnselected)
            | (Selected, Submitted)
            | (Selected, ExpiredUnsubmitted)
    )
}

impl Harness {
    pub fn new() -> Self {
        let chain = Chain::genesis(10, 100 * WEI_PER_ETH).expect("valid genesis");
        let market = Marketplace::new(chain, GasSchedule::paper());
        let supply = market.chain().genesis_supply();
        Self {
            market,
            supply,
            statuses: BTreeMap::new(),
            ops_applied: 0,
            ops_rejected: 0,
        }
    }

    fn account(&self, byte: u8) -> Address {
        let accounts = self.market.chain().accounts();
        accounts[byte as usize % accounts.len()].address
    }

    /// Picks an existing uid, or a nonexistent one for roughly one draw in
    /// `len + 1`.
    fn uid(&self, byte: u8) -> Uid {
        let uids: Vec<Uid> = self.market.request_records().map(|r| r.uid).collect();
        let i = byte as usize % (uids.len() + 1);
        uids.get(i).copied().unwrap_or_else(|| {
            let mut bytes = [0u8; 32];
            bytes[0] = byte;
            Uid::from_bytes(bytes)
        })
    }

    fn check(&mut self, label: &str) -> Result<(), InvariantViolation> {
        if self.market.total_wei() != self.supply {
            return Err(InvariantViolation(format!(
                "{label}: conservation broken: {} != {}",
                self.market.total_wei(),
                self.supply
            )));
        }
        let mut selected_prices = 0u128;
        let uids: Vec<Uid> = self.market.request_records().map(|r| r.uid).collect();
        for uid in uids {
            for offer in self.market.offers_for(uid) {
                let key = (uid, offer.supplier);
                match self.statuses.get(&key) {
                    None => {
                        if offer.status != OfferStatus::Pending {
                            return Err(InvariantViolation(format!(
                                "{label}: new offer born in state {:?}",
                                offer.status
                            )));
                        }
                    }
                    Some(previous) => {
                        if *previous != offer.status && !legal_edge(*previous, offer.status) {
                            return Err(InvariantViolation(format!(
                                "{label}: illegal offer edge {previous:?} -> {:?}",
                                offer.status
                            )));
                        }
                    }
                }
                self.statuses.insert(key, offer.status);
                if offer.status == OfferStatus::Selected {
                    selected_prices += offer.price;
                }
            }
        }
        if self.market.escrow().total() != selected_prices {
            return Err(InvariantViolation(format!(
                "{label}: escrow {} != outstanding selected prices {selected_prices}",
                self.market.escrow().total()
            )));
        }
        Ok(())
    }

    fn record_result(
        &mut self,
        label: &str,
        snapshot: Marketplace,
        rejected: Option<ContractError>,
    ) -> Result<(), InvariantViolation> {
        match rejected {
            None => self.ops_applied += 1,
            Some(_) => {
                self.ops_rejected += 1;
                if self.market != snapshot {
                    return Err(InvariantViolation(format!(
                        "{label}: rejected operation mutated state"
                    )));
                }
            }
        }
        self.check(label)
    }

    fn step(
        &mut self,
        op: u8,
        cursor: &mut impl Iterator<Item = u8>,
    ) -> Result<(), InvariantViolation> {
        let mut next = || cursor.next().unwrap_or(0);
        let snapshot = self.market.clone();
        match op % 8 {
            0 => {
                let consumer = self.account(next());
                let budget = next() as u128 * WEI_PER_ETH / 100;
                // A zero offset makes the deadline invalid on purpose.
                let offset = next() as u64 % 4 * 1800;
                let deadline = self.market.chain().now() + offset;
                let device = DeviceSpec::new("Vendor", "Widget", "W-1", "1.0", None)
                    .expect("static spec is valid");
                let result = self.market.request(consumer, device, budget, deadline);
                self.record_result("request", snapshot, result.err())
            }
            1 | 2 => {
                let supplier = self.account(next());
                let uid = self.uid(next());
                let price = next() as u128 * WEI_PER_ETH / 200;
                let offset = next() as u64 % 4 * 900;
                let deadline = self.market.chain().now() + offset;
                let meta = OfferMeta {
                    ace_count: next() as u32,
                    file_size_kb: next() as f64 / 16.0,
                    flow_scope: String::from("remote+outbound"),
                    network_setting: String::from("lab"),
                };
                let result = self.market.offer(supplier, uid, meta, price, deadline);
                self.record_result("offer", snapshot, result.err())
            }
            3 => {
                let caller = self.account(next());
                let uid = self.uid(next());
                let mask = next();
                let suppliers: Vec<Address> = self
                    .market
                    .offers_for(uid)
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> (i % 8) & 1 == 1)
                    .map(|(_, o)| o.supplier)
                    .collect();
                let result = self.market.select(caller, uid, &suppliers);
                self.record_result("select", snapshot, result.err())
            }
            4 => {
                let uid = self.uid(next());
                let chooser = next();
                let supplier = self
                    .market
                    .offers_for(uid)
                    .iter()
                    .filter(|o| o.status == OfferStatus::Selected)
                    .map(|o| o.supplier)
                    .cycle()
                    .nth(chooser as usize % 4)
                    .unwrap_or_else(|| self.account(chooser));
                let index = digest(&[next()]);
                let deadline = self.market.chain().now() + 600;
                let result = self.market.submit(supplier, uid, index, deadline);
                self.record_result("submit", snapshot, result.err())
            }
            5 => {
                let caller = self.account(next());
                let uid = self.uid(next());
                let supplier = self.account(next());
                let score = next();
                let result = self.market.rate(caller, uid, supplier, score);
                self.record_result("rate", snapshot, result.err())
            }
            6 => {
                let sweeper = self.account(next());
                let result = self.market.expire(sweeper);
                self.record_result("expire", snapshot, result.err())
            }
            _ => {
                self.market.advance_time(next() as u64 * 300);
                self.check("advance")
            }
        }
    }
}

impl Default for Harness {
    fn default() -> Self {
        Self::new()
    }
}

/// Decodes and applies a whole tape, checking invariants after every step.
pub fn drive(tape: &[u8]) -> Result<Harness, InvariantViolation> {
    let mut harness = Harness::new();
    harness.check("genesis")?;
    let mut cursor = tape.iter().copied();
    while let Some(op) = cursor.next() {
        harness.step(op, &mut cursor)?;
    }
    Ok(harness)
}
