//! Property suites: wei conservation and offer state legality over random
//! operation tapes, UID uniqueness at scale, strategy budget respect, variant
//! arithmetic, and store immutability.

use std::collections::BTreeSet;

use proptest::prelude::*;

use mudmarket_core::contract::{DeviceSpec, OfferRecord, OfferStatus, Uid};
use mudmarket_core::ledger::{Address, Chain, GasSchedule, WEI_PER_ETH};
use mudmarket_core::market::{select_offers, Strategy};
use mudmarket_core::mudfile::{self, AceScope, QualityTier};
use mudmarket_core::offstore::{digest, MemStore, MudStore};
use mudmarket_core::sim;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Conservation, escrow accounting, legal offer edges, and rejected-call
    /// atomicity hold across arbitrary operation tapes. The full-size run
    /// lives in the acceptance suite.
    #[test]
    fn random_tapes_preserve_invariants(tape in proptest::collection::vec(any::<u8>(), 0..256)) {
        let harness = sim::drive(&tape).map_err(|v| TestCaseError::fail(v.0))?;
        prop_assert_eq!(harness.market.total_wei(), harness.market.chain().genesis_supply());
    }

    /// Budget-constrained strategies never select an offer priced above the
    /// budget, for any offer set and budget.
    #[test]
    fn budget_constrained_strategies_respect_budget(
        offers in proptest::collection::vec((0u64..50, any::<u8>(), 0u64..30, 0u32..20_000), 0..12),
        budget_tenths in 0u64..30,
        k in 1usize..5,
    ) {
        let offers: Vec<OfferRecord> = offers
            .into_iter()
            .enumerate()
            .map(|(i, (block, supplier, price_tenths, size_centi_kb))| {
                // Unique per offer (the contract enforces one offer per
                // supplier); leading byte still randomizes tie-break order.
                let mut address = [supplier; 20];
                address[19] = i as u8;
                OfferRecord {
                request_uid: Uid::from_bytes([1; 32]),
                supplier: Address::from_bytes(address),
                ace_count: 1,
                file_size_kb: size_centi_kb as f64 / 100.0,
                flow_scope: "remote+outbound".into(),
                network_setting: "lab".into(),
                price: price_tenths as u128 * WEI_PER_ETH / 10,
                deadline: 1800,
                created_at: 0,
                block_number: block,
                over_budget: false,
                status: OfferStatus::Pending,
                submit_deadline: None,
            }})
            .collect();
        let budget = budget_tenths as u128 * WEI_PER_ETH / 10;
        for strategy in [
            Strategy::LargestSizeWithinBudget(k),
            Strategy::LowestPriceWithinBudget(k),
        ] {
            let picked = select_offers(strategy, &offers, budget, &Default::default());
            prop_assert!(picked.len() <= k);
            for supplier in picked {
                let offer = offers.iter().find(|o| o.supplier == supplier).unwrap();
                prop_assert!(offer.price <= budget);
            }
        }
    }

    /// Variants only remove ACEs, LQ removes exactly one, and every variant
    /// survives a parse/serialize round trip — for any seed.
    #[test]
    fn variant_arithmetic_for_any_seed(seed in any::<u64>()) {
        for (_, text) in mudfile::fixtures::all() {
            let profile = mudfile::parse(text).unwrap();
            for tier in QualityTier::ALL {
                let variant = mudfile::derive_variant(&profile, tier, seed).unwrap();
                for ace in variant.aces() {
                    prop_assert!(profile.aces().any(|original| original == ace));
                }
                match tier {
                    QualityTier::Hq => prop_assert_eq!(variant.ace_count(), profile.ace_count()),
                    QualityTier::Lq => {
                        prop_assert_eq!(variant.ace_count(), profile.ace_count() - 1)
                    }
                    QualityTier::Mqr => {
                        prop_assert!(variant.aces().all(|a| a.scope() == AceScope::Remote));
                        prop_assert!(variant.ace_count() <= profile.ace_count());
                    }
                    QualityTier::Mqo => {
                        prop_assert!(variant.to_device_aces.is_empty());
                        prop_assert!(variant.ace_count() <= profile.ace_count());
                    }
                }
                let round = mudfile::parse(&mudfile::serialize(&variant)).unwrap();
                prop_assert_eq!(round, variant);
            }
        }
    }

    /// get . put is the identity and any single bit flip is caught.
    #[test]
    fn store_round_trip_and_bit_flip(
        content in proptest::collection::vec(any::<u8>(), 1..2048),
        flip_bit in any::<usize>(),
    ) {
        let mut store = MemStore::new();
        let index = store.put(&content).unwrap();
        prop_assert_eq!(store.get(&index).unwrap(), content.clone());
        prop_assert!(store.verify(&index, &content));

        let mut flipped = content.clone();
        let bit = flip_bit % (flipped.len() * 8);
        flipped[bit / 8] ^= 1 << (bit % 8);
        prop_assert!(!store.verify(&index, &flipped));
        prop_assert_ne!(digest(&flipped), index);
    }
}

/// UIDs stay unique across 10,000 requests with distinct
/// (timestamp, consumer) pairs.
#[test]
fn uid_uniqueness_at_scale() {
    let chain = Chain::genesis(2, 100 * WEI_PER_ETH).unwrap();
    let mut market = mudmarket_core::contract::Marketplace::new(chain, GasSchedule::paper());
    let consumers = [
        market.chain().accounts()[0].address,
        market.chain().accounts()[1].address,
    ];
    let device = DeviceSpec::new("Vendor", "Widget", "W-1", "1.0", None).unwrap();
    let mut uids = BTreeSet::new();
    for i in 0..10_000usize {
        let consumer = consumers[i % 2];
        let deadline = market.chain().now() + 60;
        let (uid, _) = market
            .request(consumer, device.clone(), 0, deadline)
            .unwrap();
        uids.insert(uid);
        if i % 2 == 1 {
            market.advance_time(1);
        }
    }
    assert_eq!(uids.len(), 10_000);
}
