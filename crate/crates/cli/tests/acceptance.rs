//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Run with:
//!
//! ```text
//! cargo test -p mudmarket-cli --test acceptance -- --nocapture --test-threads=1
//! ```

use std::collections::BTreeMap;
use std::time::Instant;

use proptest::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mudmarket_core::ledger::{Function, GasSchedule};
use mudmarket_core::market::gas_report;
use mudmarket_core::mudfile::{self, AceScope, QualityTier};
use mudmarket_core::offstore::{digest, MudStore};
use mudmarket_core::scenario::{
    expected_counts, run_all, run_scenario, ScenarioId, GENESIS_BALANCE,
};
use mudmarket_core::sim;

const SEED: u64 = 7;

/// Reference per-function figures: gas (exact), fee in ETH and cost in USD
/// (both held to 0.5%).
const REFERENCE: [(Function, u64, f64, f64); 5] = [
    (Function::Request, 736_408, 0.017165673, 28.02),
    (Function::Offer, 199_358, 0.004647035, 7.58),
    (Function::Select, 173_681, 0.004048504, 6.60),
    (Function::Submit, 218_216, 0.005086615, 8.30),
    (Function::Rate, 140_474, 0.003274449, 5.34),
];

fn within_half_percent(actual: f64, reference: f64) -> bool {
    (actual - reference).abs() / reference <= 0.005
}

#[test]
fn criterion_1_gas_regression() {
    let started = Instant::now();
    let reports = run_all(SEED).expect("all scenarios run");
    let schedule = GasSchedule::paper();
    let table = gas_report(reports.iter().map(|r| &r.usage), &schedule);
    let rows: BTreeMap<Function, _> = table.rows.iter().map(|r| (r.function, r)).collect();
    for (function, gas, fee_eth, cost_usd) in REFERENCE {
        let row = rows[&function];
        assert_eq!(
            row.avg_gas, gas as f64,
            "{function}: gas column must match exactly"
        );
        assert!(
            within_half_percent(row.fee_eth, fee_eth),
            "{function}: fee {:.9} deviates more than 0.5% from {fee_eth:.9}",
            row.fee_eth
        );
        assert!(
            within_half_percent(row.cost_usd, cost_usd),
            "{function}: cost {:.2} deviates more than 0.5% from {cost_usd:.2}",
            row.cost_usd
        );
    }
    assert!(
        table.full_cycle_cost_usd < 100.0,
        "full cycle {:.2} USD must stay under 100",
        table.full_cycle_cost_usd
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1s");
    println!(
        "acceptance criterion 1 (gas regression, {:?}): PASS",
        elapsed
    );
}

#[test]
fn criterion_2_scenario_conformance() {
    let started = Instant::now();
    let reports = run_all(SEED).expect("all scenarios run");
    assert_eq!(reports.len(), 11);
    for report in &reports {
        let expected = expected_counts(report.id);
        match (expected, report.counts) {
            (None, None) => {}
            (Some(want), Some(got)) => {
                assert_eq!(
                    (want.selected, want.submitted, want.rated),
                    (got.selected, got.submitted, got.rated),
                    "{}: (selected, submitted, rated) mismatch",
                    report.id
                );
                assert_eq!(want.offers, got.offers, "{}: offer count", report.id);
            }
            (want, got) => panic!("{}: counts {got:?}, expected {want:?}", report.id),
        }
    }
    let bs04 = reports
        .iter()
        .find(|r| r.id == ScenarioId::Bs04)
        .expect("BS04 present");
    let mut scores: Vec<u8> = bs04.ratings_given.iter().map(|(_, s)| *s).collect();
    scores.sort_unstable();
    assert_eq!(
        scores,
        [10, 40, 100],
        "BS04 must rate HQ/MQO/LQ as 100/40/10"
    );
    let mut tiers: Vec<&str> = bs04
        .tiers_submitted
        .iter()
        .map(|(_, t)| t.as_str())
        .collect();
    tiers.sort_unstable();
    assert_eq!(tiers, ["HQ", "LQ", "MQO"]);
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10s");
    println!(
        "acceptance criterion 2 (scenario conformance, {:?}): PASS",
        elapsed
    );
}

#[test]
fn criterion_3_refund_exactness() {
    let report = run_scenario(ScenarioId::Es01, SEED).expect("ES01 runs");
    // U5's own calls in ES01 are one request and one select; the sweep it
    // triggers is gas-free. Every escrowed wei must come back.
    let schedule = GasSchedule::paper();
    let own_fees = schedule.fee_wei(736_408) + schedule.fee_wei(173_681);
    let u5 = report
        .final_balances
        .iter()
        .find(|(label, _)| label == "U5")
        .expect("U5 listed")
        .1;
    assert_eq!(
        GENESIS_BALANCE - u5,
        own_fees,
        "consumer deficit must equal its own transaction fees exactly"
    );
    assert_eq!(report.escrow_total, 0, "escrow ledger must be empty");
    println!("acceptance criterion 3 (refund exactness): PASS");
}

#[test]
fn criterion_4_conservation_property() {
    // >= 1000 randomized operation tapes; the harness checks conservation,
    // escrow accounting, legal offer edges, and rejected-call atomicity
    // after every step.
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig {
        cases: 1000,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    let mut applied = 0usize;
    let mut rejected = 0usize;
    runner
        .run(&proptest::collection::vec(any::<u8>(), 0..300), |tape| {
            let harness =
                sim::drive(&tape).map_err(|v| proptest::test_runner::TestCaseError::fail(v.0))?;
            prop_assert_eq!(
                harness.market.total_wei(),
                harness.market.chain().genesis_supply()
            );
            Ok(())
        })
        .expect("conservation and state-machine legality over 1000 sequences");
    // A direct tape keeps a sanity check on mixed valid/invalid coverage.
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..50 {
        let mut tape = vec![0u8; 200];
        rng.fill_bytes(&mut tape);
        let harness = sim::drive(&tape).expect("invariants hold");
        applied += harness.ops_applied;
        rejected += harness.ops_rejected;
    }
    assert!(
        applied > 0 && rejected > 0,
        "tapes must mix valid and invalid calls"
    );
    println!("acceptance criterion 4 (conservation property, 1000 sequences): PASS");
}

#[test]
fn criterion_5_immutability_suite() {
    let dir = tempfile::tempdir().unwrap();
    let mut store =
        mudmarket_cli::fsstore::FsStore::open(dir.path().join("blobs")).expect("store opens");
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let catalog = mudmarket_core::market::DeviceCatalog::bundled();

    let mut payloads: Vec<Vec<u8>> = Vec::new();
    // Realistic MUD payloads: random-seed variants of every bundled profile.
    for entry in catalog.entries() {
        for tier in QualityTier::ALL {
            for _ in 0..6 {
                let variant =
                    mudfile::derive_variant(&entry.profile, tier, rng.next_u64()).unwrap();
                payloads.push(mudfile::serialize(&variant).into_bytes());
            }
        }
    }
    // Plus raw random payloads.
    for _ in 0..48 {
        let len = 1 + (rng.next_u64() % 4096) as usize;
        let mut payload = vec![0u8; len];
        rng.fill_bytes(&mut payload);
        payloads.push(payload);
    }
    assert!(payloads.len() >= 100, "suite needs at least 100 payloads");

    for payload in &payloads {
        let index = store.put(payload).expect("put succeeds");
        assert_eq!(&store.get(&index).expect("get succeeds"), payload);
        assert!(store.verify(&index, payload));

        let bit = (rng.next_u64() as usize) % (payload.len() * 8);
        let mut flipped = payload.clone();
        flipped[bit / 8] ^= 1 << (bit % 8);
        assert_ne!(digest(&flipped), index, "bit flip must change the index");
        assert!(
            !store.verify(&index, &flipped),
            "verify must catch the flipped bit"
        );
    }
    println!(
        "acceptance criterion 5 (immutability, {} payloads): PASS",
        payloads.len()
    );
}

#[test]
fn criterion_6_variant_arithmetic() {
    for (key, text) in mudfile::fixtures::all() {
        let profile = mudfile::parse(text).expect("fixture parses");
        let hq = mudfile::derive_variant(&profile, QualityTier::Hq, SEED).unwrap();
        let mqr = mudfile::derive_variant(&profile, QualityTier::Mqr, SEED).unwrap();
        let mqo = mudfile::derive_variant(&profile, QualityTier::Mqo, SEED).unwrap();
        let lq = mudfile::derive_variant(&profile, QualityTier::Lq, SEED).unwrap();

        assert_eq!(lq.ace_count(), hq.ace_count() - 1, "{key}: LQ = HQ - 1");
        assert_eq!(
            mqr.aces().filter(|a| a.scope() == AceScope::Local).count(),
            0,
            "{key}: MQR must contain no local ACEs"
        );
        assert_eq!(
            mqo.to_device_aces.len(),
            0,
            "{key}: MQO must contain no to-device ACEs"
        );
        for variant in [&hq, &mqr, &mqo, &lq] {
            let reparsed = mudfile::parse(&mudfile::serialize(variant)).expect("round trip");
            assert_eq!(&reparsed, variant, "{key}: parse/serialize round trip");
        }
    }
    println!("acceptance criterion 6 (variant arithmetic): PASS");
}

#[test]
fn criterion_7_determinism() {
    let first = run_all(SEED).expect("first run");
    let second = run_all(SEED).expect("second run");
    for (a, b) in first.iter().zip(&second) {
        assert_eq!(
            a.transcript, b.transcript,
            "{}: transcripts must be byte-identical",
            a.id
        );
        assert_eq!(a.transcript_digest, b.transcript_digest);
    }
    // A different seed may change only seeded choices; the scripted counts
    // still conform.
    let other = run_all(SEED + 1).expect("other seed");
    for report in &other {
        let expected = expected_counts(report.id);
        assert_eq!(
            report.counts.map(|c| (c.selected, c.submitted, c.rated)),
            expected.map(|c| (c.selected, c.submitted, c.rated)),
            "{}: counts under a different seed",
            report.id
        );
    }
    assert!(
        first
            .iter()
            .zip(&other)
            .any(|(a, b)| a.transcript_digest != b.transcript_digest),
        "different seeds must change seeded choices somewhere"
    );
    println!("acceptance criterion 7 (determinism): PASS");
}
