//! Consumer/supplier market machinery: offer-selection strategies, the
//! rating policy, quality-tier inference, the bundled device catalog, and
//! gas/cost reporting.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::contract::{DeviceSpec, OfferRecord, OfferStatus};
use crate::ledger::{fee_report, Address, Function, GasSchedule};
use crate::mudfile::{self, MudProfile, QualityTier};

/// How a consumer picks suppliers from the offers on one request. Selection
/// is deterministic: ties are broken by offer arrival order (block number,
/// then supplier address). Budget-constrained kinds never pick an offer
/// priced above the budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    FirstArrival,
    FirstK(usize),
    LargestSizeWithinBudget(usize),
    LowestPriceWithinBudget(usize),
    HighestReputation(usize),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::FirstArrival => write!(f, "first_arrival"),
            Strategy::FirstK(k) => write!(f, "first_k({k})"),
            Strategy::LargestSizeWithinBudget(k) => write!(f, "largest_size_within_budget({k})"),
            Strategy::LowestPriceWithinBudget(k) => write!(f, "lowest_price_within_budget({k})"),
            Strategy::HighestReputation(k) => write!(f, "highest_reputation({k})"),
        }
    }
}

fn arrival_key(offer: &OfferRecord) -> (u64, Address) {
    (offer.block_number, offer.supplier)
}

/// Applies a strategy to the pending offers of one request and returns the
/// chosen suppliers in selection order. May return fewer than `k` (or none).
pub fn select_offers(
    strategy: Strategy,
    offers: &[OfferRecord],
    budget: u128,
    reputations: &BTreeMap<Address, f64>,
) -> Vec<Address> {
    let mut pending: Vec<&OfferRecord> = offers
        .iter()
        .filter(|o| o.status == OfferStatus::Pending)
        .collect();
    pending.sort_unstable_by_key(|o| arrival_key(o));
    let (ranked, k): (Vec<&OfferRecord>, usize) = match strategy {
        Strategy::FirstArrival => (pending, 1),
        Strategy::FirstK(k) => (pending, k),
        Strategy::LargestSizeWithinBudget(k) => {
            let mut within: Vec<&OfferRecord> =
                pending.into_iter().filter(|o| o.price <= budget).collect();
            within.sort_by(|a, b| {
                b.file_size_kb
                    .total_cmp(&a.file_size_kb)
                    .then_with(|| arrival_key(a).cmp(&arrival_key(b)))
            });
            (within, k)
        }
        Strategy::LowestPriceWithinBudget(k) => {
            let mut within: Vec<&OfferRecord> =
                pending.into_iter().filter(|o| o.price <= budget).collect();
            within.sort_by(|a, b| {
                a.price
                    .cmp(&b.price)
                    .then_with(|| arrival_key(a).cmp(&arrival_key(b)))
            });
            (within, k)
        }
        Strategy::HighestReputation(k) => {
            let mut ranked = pending;
            // Unrated suppliers rank below any rated one.
            ranked.sort_by(|a, b| {
                let ra = reputations.get(&a.supplier);
                let rb = reputations.get(&b.supplier);
                match (ra, rb) {
                    (Some(x), Some(y)) => y.total_cmp(x),
                    (Some(_), None) => core::cmp::Ordering::Less,
                    (None, Some(_)) => core::cmp::Ordering::Greater,
                    (None, None) => core::cmp::Ordering::Equal,
                }
                .then_with(|| arrival_key(a).cmp(&arrival_key(b)))
            });
            (ranked, k)
        }
    };
    ranked.into_iter().take(k).map(|o| o.supplier).collect()
}

/// Score a consumer assigns after inspecting retrieved data of a known tier:
/// 100 for HQ, 40 for either medium tier, 10 for LQ.
pub fn rate_policy(tier: QualityTier) -> u8 {
    match tier {
        QualityTier::Hq => 100,
        QualityTier::Mqr | QualityTier::Mqo => 40,
        QualityTier::Lq => 10,
    }
}

/// Identifies which quality variant of `reference` a retrieved profile is,
/// by comparing ACE lists. Returns `None` for unrelated content.
pub fn infer_tier(profile: &MudProfile, reference: &MudProfile) -> Option<QualityTier> {
    let same_aces = |a: &MudProfile, b: &MudProfile| {
        a.from_device_aces == b.from_device_aces && a.to_device_aces == b.to_device_aces
    };
    if same_aces(profile, reference) {
        return Some(QualityTier::Hq);
    }
    let mqr = mudfile::derive_variant(reference, QualityTier::Mqr, 0).expect("infallible tier");
    if same_aces(profile, &mqr) {
        return Some(QualityTier::Mqr);
    }
    let mqo = mudfile::derive_variant(reference, QualityTier::Mqo, 0).expect("infallible tier");
    if same_aces(profile, &mqo) {
        return Some(QualityTier::Mqo);
    }
    if profile.ace_count() + 1 == reference.ace_count()
        && profile
            .aces()
            .all(|ace| reference.aces().any(|original| original == ace))
    {
        return Some(QualityTier::Lq);
    }
    None
}

/// One bundled device: its spec as used in requests and its full-quality
/// profile.
#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub key: &'static str,
    pub device: DeviceSpec,
    pub profile: MudProfile,
}

/// The three representative IoT devices shipped with the crate.
#[derive(Clone, Debug)]
pub struct DeviceCatalog {
    entries: Vec<CatalogEntry>,
}

impl DeviceCatalog {
    pub fn bundled() -> Self {
        let specs = [
            DeviceSpec::new(
                "Amazon",
                "Echo",
                "SK705DI",
                "2018-04-27",
                Some("cpe:2.3:o:amazon:echo_firmware:2018-04-27:*:*:*:*:*:*:*"),
            ),
            DeviceSpec::new(
                "LIFX",
                "Smart Lightbulb",
                "A19",
                "2.77",
                Some("cpe:2.3:h:lifx:a19:*:*:*:*:*:*:*:*"),
            ),
            DeviceSpec::new(
                "Samsung",
                "Smart Camera",
                "SNH-1011N",
                "1.0",
                Some("cpe:2.3:h:samsung:snh_1011n:*:*:*:*:*:*:*:*"),
            ),
        ];
        let entries = mudfile::fixtures::all()
            .into_iter()
            .zip(specs)
            .map(|((key, text), device)| CatalogEntry {
                key,
                device: device.expect("bundled device specs are valid"),
                profile: mudfile::parse(text).expect("bundled fixtures are valid"),
            })
            .collect();
        Self { entries }
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    /// Matches a request's device spec against the catalog, the way a
    /// consumer matches retrieved data back to the device it asked about.
    pub fn match_device(&self, spec: &DeviceSpec) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| {
            e.device.manufacturer == spec.manufacturer && e.device.device_name == spec.device_name
        })
    }
}

// ---------------------------------------------------------------------------
// Gas/cost reporting
// ---------------------------------------------------------------------------

/// Per-function call tallies accumulated over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionUsage {
    pub calls: u64,
    pub total_payload_bytes: u64,
    pub total_gas: u64,
}

/// Average on-chain size of each function call as measured on the reference
/// deployment; shown alongside this artifact's own measured sizes.
pub fn reference_payload_bytes(function: Function) -> u64 {
    match function {
        Function::Request => 709,
        Function::Offer => 262,
        Function::Select => 388,
        Function::Submit => 301,
        Function::Rate => 143,
        Function::Expire => 0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasReportRow {
    pub function: Function,
    pub calls: u64,
    pub avg_payload_bytes: f64,
    pub reference_payload_bytes: u64,
    pub avg_gas: f64,
    pub fee_eth: f64,
    pub cost_usd: f64,
}

/// Per-function averages plus the cost of one full five-function cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasReport {
    pub rows: Vec<GasReportRow>,
    pub full_cycle_gas: f64,
    pub full_cycle_fee_eth: f64,
    pub full_cycle_cost_usd: f64,
    pub gas_per_eth: u64,
    pub usd_per_eth: f64,
}

/// Aggregates per-function usage maps (one per scenario) into the gas report.
/// Functions with no calls anywhere are omitted; `expire` is bookkeeping and
/// never reported.
pub fn gas_report<'a, I>(usages: I, schedule: &GasSchedule) -> GasReport
where
    I: IntoIterator<Item = &'a BTreeMap<Function, FunctionUsage>>,
{
    let mut combined: BTreeMap<Function, FunctionUsage> = BTreeMap::new();
    for usage in usages {
        for (function, u) in usage {
            let entry = combined.entry(*function).or_default();
            entry.calls += u.calls;
            entry.total_payload_bytes += u.total_payload_bytes;
            entry.total_gas += u.total_gas;
        }
    }
    let mut rows = Vec::new();
    let mut full_cycle_gas = 0.0;
    for function in Function::CONTRACT {
        let Some(u) = combined.get(&function) else {
            continue;
        };
        if u.calls == 0 {
            continue;
        }
        let avg_gas = u.total_gas as f64 / u.calls as f64;
        let fee_eth = avg_gas / schedule.gas_per_eth as f64;
        rows.push(GasReportRow {
            function,
            calls: u.calls,
            avg_payload_bytes: u.total_payload_bytes as f64 / u.calls as f64,
            reference_payload_bytes: reference_payload_bytes(function),
            avg_gas,
            fee_eth,
            cost_usd: fee_eth * schedule.usd_per_eth,
        });
        full_cycle_gas += avg_gas;
    }
    let full_cycle_fee_eth = full_cycle_gas / schedule.gas_per_eth as f64;
    GasReport {
        rows,
        full_cycle_gas,
        full_cycle_fee_eth,
        full_cycle_cost_usd: full_cycle_fee_eth * schedule.usd_per_eth,
        gas_per_eth: schedule.gas_per_eth,
        usd_per_eth: schedule.usd_per_eth,
    }
}

/// Renders the gas report as an aligned text table.
pub fn render_gas_table(report: &GasReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<9} {:>6} {:>11} {:>10} {:>10} {:>13} {:>11}\n",
        "function", "calls", "avg bytes", "ref bytes", "gas", "fee (ETH)", "cost (USD)"
    ));
    for row in &report.rows {
        out.push_str(&format!(
            "{:<9} {:>6} {:>11.1} {:>10} {:>10.0} {:>13.9} {:>11.2}\n",
            row.function.name(),
            row.calls,
            row.avg_payload_bytes,
            row.reference_payload_bytes,
            row.avg_gas,
            row.fee_eth,
            row.cost_usd,
        ));
    }
    out.push_str(&format!(
        "full cycle: {:.0} gas, {:.9} ETH, {:.2} USD (at {} gas/ETH, {} USD/ETH)\n",
        report.full_cycle_gas,
        report.full_cycle_fee_eth,
        report.full_cycle_cost_usd,
        report.gas_per_eth,
        report.usd_per_eth,
    ));
    out
}

/// Sanity figure echoed in reports: ETH/USD for one call of `function`.
pub fn function_cost(function: Function, schedule: &GasSchedule) -> (f64, f64) {
    fee_report(schedule.gas_for(function, 0), schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::Uid;
    use crate::ledger::WEI_PER_ETH;
    use crate::mudfile::fixtures;

    fn offer(block: u64, supplier_byte: u8, price_tenths: u64, size_kb: f64) -> OfferRecord {
        OfferRecord {
            request_uid: Uid::from_bytes([0; 32]),
            supplier: Address::from_bytes([supplier_byte; 20]),
            ace_count: 10,
            file_size_kb: size_kb,
            flow_scope: "remote+outbound".into(),
            network_setting: "lab".into(),
            price: price_tenths as u128 * WEI_PER_ETH / 10,
            deadline: 1800,
            created_at: 0,
            block_number: block,
            over_budget: false,
            status: OfferStatus::Pending,
            submit_deadline: None,
        }
    }

    fn addr(byte: u8) -> Address {
        Address::from_bytes([byte; 20])
    }

    #[test]
    fn first_arrival_takes_earliest_block() {
        let offers = [
            offer(4, 4, 5, 1.0),
            offer(2, 2, 9, 1.0),
            offer(3, 3, 1, 1.0),
        ];
        let picked = select_offers(
            Strategy::FirstArrival,
            &offers,
            2 * WEI_PER_ETH,
            &BTreeMap::new(),
        );
        assert_eq!(picked, [addr(2)]);
    }

    #[test]
    fn lowest_price_within_budget_sorts_and_filters() {
        // Prices 0.2, 0.9, 0.4, 0.3 ETH with budget 0.5: picks 0.2, 0.3, 0.4.
        let offers = [
            offer(1, 1, 2, 1.0),
            offer(2, 2, 9, 1.0),
            offer(3, 3, 4, 1.0),
            offer(4, 4, 3, 1.0),
        ];
        let budget = WEI_PER_ETH / 2;
        let picked = select_offers(
            Strategy::LowestPriceWithinBudget(3),
            &offers,
            budget,
            &BTreeMap::new(),
        );
        assert_eq!(picked, [addr(1), addr(4), addr(3)]);
    }

    #[test]
    fn largest_size_within_budget_never_exceeds_budget() {
        let offers = [
            offer(1, 1, 2, 9.0),
            offer(2, 2, 9, 12.0), // biggest but over budget
            offer(3, 3, 4, 3.0),
            offer(4, 4, 3, 9.0), // ties with offer 1 on size; later arrival
        ];
        let budget = WEI_PER_ETH / 2;
        let picked = select_offers(
            Strategy::LargestSizeWithinBudget(2),
            &offers,
            budget,
            &BTreeMap::new(),
        );
        assert_eq!(picked, [addr(1), addr(4)]);
    }

    #[test]
    fn unrated_supplier_ranks_below_any_rated() {
        let offers = [
            offer(1, 1, 5, 1.0),
            offer(2, 2, 5, 1.0),
            offer(3, 3, 5, 1.0),
        ];
        let reputations: BTreeMap<Address, f64> =
            [(addr(2), 10.0), (addr(3), 90.0)].into_iter().collect();
        let picked = select_offers(
            Strategy::HighestReputation(2),
            &offers,
            2 * WEI_PER_ETH,
            &reputations,
        );
        assert_eq!(picked, [addr(3), addr(2)]);
    }

    #[test]
    fn selection_ignores_non_pending_offers() {
        let mut selected = offer(1, 1, 2, 1.0);
        selected.status = OfferStatus::Selected;
        let offers = [selected, offer(2, 2, 3, 1.0)];
        let picked = select_offers(
            Strategy::FirstK(2),
            &offers,
            2 * WEI_PER_ETH,
            &BTreeMap::new(),
        );
        assert_eq!(picked, [addr(2)]);
    }

    #[test]
    fn rate_policy_scores() {
        assert_eq!(rate_policy(QualityTier::Hq), 100);
        assert_eq!(rate_policy(QualityTier::Mqo), 40);
        assert_eq!(rate_policy(QualityTier::Mqr), 40);
        assert_eq!(rate_policy(QualityTier::Lq), 10);
    }

    #[test]
    fn tier_inference_round_trips_variants() {
        let catalog = DeviceCatalog::bundled();
        for entry in catalog.entries() {
            for tier in QualityTier::ALL {
                let variant = mudfile::derive_variant(&entry.profile, tier, 5).unwrap();
                assert_eq!(
                    infer_tier(&variant, &entry.profile),
                    Some(tier),
                    "{}/{tier}",
                    entry.key
                );
            }
        }
    }

    #[test]
    fn unrelated_content_has_no_tier() {
        let catalog = DeviceCatalog::bundled();
        let echo = &catalog.get("amazon-echo").unwrap().profile;
        let lifx = &catalog.get("lifx-lightbulb").unwrap().profile;
        assert_eq!(infer_tier(lifx, echo), None);
    }

    #[test]
    fn catalog_matches_request_specs() {
        let catalog = DeviceCatalog::bundled();
        let spec = DeviceSpec::new("Amazon", "Echo", "", "", None).unwrap();
        assert_eq!(catalog.match_device(&spec).unwrap().key, "amazon-echo");
        let unknown = DeviceSpec::new("Acme", "Toaster", "", "", None).unwrap();
        assert!(catalog.match_device(&unknown).is_none());
        assert_eq!(fixtures::all().len(), catalog.entries().len());
    }

    #[test]
    fn gas_report_averages_exactly_under_fixed_schedule() {
        let schedule = GasSchedule::paper();
        let mut a: BTreeMap<Function, FunctionUsage> = BTreeMap::new();
        a.insert(
            Function::Request,
            FunctionUsage {
                calls: 2,
                total_payload_bytes: 240,
                total_gas: 2 * 736_408,
            },
        );
        let mut b: BTreeMap<Function, FunctionUsage> = BTreeMap::new();
        b.insert(
            Function::Request,
            FunctionUsage {
                calls: 1,
                total_payload_bytes: 90,
                total_gas: 736_408,
            },
        );
        b.insert(
            Function::Expire,
            FunctionUsage {
                calls: 5,
                total_payload_bytes: 0,
                total_gas: 0,
            },
        );
        let report = gas_report([&a, &b], &schedule);
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.function, Function::Request);
        assert_eq!(row.calls, 3);
        assert_eq!(row.avg_gas, 736_408.0);
        assert_eq!(row.avg_payload_bytes, 110.0);
        assert_eq!(row.reference_payload_bytes, 709);
        assert!((row.cost_usd - 27.9664).abs() < 1e-3);
        let table = render_gas_table(&report);
        assert!(table.contains("request"));
        assert!(!table.contains("expire"));
    }

    #[test]
    fn empty_usage_produces_empty_table() {
        let report = gas_report([], &GasSchedule::paper());
        assert!(report.rows.is_empty());
        assert_eq!(report.full_cycle_gas, 0.0);
    }
}
