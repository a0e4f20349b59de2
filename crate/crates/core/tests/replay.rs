//! Replay determinism and public auditability: a recorded call sequence
//! rebuilds an identical marketplace (including through a JSON round trip of
//! every call), and every committed transaction is witnessed by the public
//! records.

use mudmarket_core::contract::{CallOutcome, ContractCall, DeviceSpec, Marketplace, Score};
use mudmarket_core::ledger::{Address, Chain, Function, GasSchedule, WEI_PER_ETH};
use mudmarket_core::offstore::digest;

fn fresh() -> Marketplace {
    Marketplace::new(
        Chain::genesis(10, 100 * WEI_PER_ETH).unwrap(),
        GasSchedule::paper(),
    )
}

fn device() -> DeviceSpec {
    DeviceSpec::new("Amazon", "Echo", "SK705DI", "2018-04-27", None).unwrap()
}

/// A scripted tape: full cycle for one supplier, a second supplier left to
/// expire, then the sweep. Steps are (sender index, call, advance after).
fn tape(market: &Marketplace) -> Vec<(Address, ContractCall, u64)> {
    let user = |i: usize| market.chain().accounts()[i].address;
    let index = digest(b"echo HQ bytes");
    vec![
        (
            user(0),
            ContractCall::Request {
                device: device(),
                budget: 2 * WEI_PER_ETH,
                deadline: 3600,
            },
            0,
        ),
        (
            user(6),
            ContractCall::Offer {
                uid: placeholder_uid(),
                ace_count: 16,
                file_size_kb: 9.5,
                flow_scope: "local+remote+inbound+outbound".into(),
                network_setting: "residential-gateway".into(),
                price: WEI_PER_ETH / 2,
                deadline: 1800,
            },
            0,
        ),
        (
            user(7),
            ContractCall::Offer {
                uid: placeholder_uid(),
                ace_count: 15,
                file_size_kb: 9.1,
                flow_scope: "local+remote+outbound".into(),
                network_setting: "lab".into(),
                price: WEI_PER_ETH / 4,
                deadline: 1800,
            },
            0,
        ),
        (
            user(0),
            ContractCall::Select {
                uid: placeholder_uid(),
                suppliers: vec![user(6), user(7)],
            },
            0,
        ),
        (
            user(6),
            ContractCall::Submit {
                uid: placeholder_uid(),
                index,
                deadline: 3600,
            },
            0,
        ),
        (
            user(0),
            ContractCall::Rate {
                uid: placeholder_uid(),
                supplier: user(6),
                score: 100,
            },
            1801,
        ),
        (user(0), ContractCall::Expire, 0),
    ]
}

use mudmarket_core::contract::Uid;

/// Stand-in resolved to the real uid while executing; lets the tape be
/// written before the uid exists.
fn placeholder_uid() -> Uid {
    Uid::from_bytes([0xAA; 32])
}

fn patch(call: ContractCall, uid: Uid) -> ContractCall {
    match call {
        ContractCall::Offer {
            ace_count,
            file_size_kb,
            flow_scope,
            network_setting,
            price,
            deadline,
            ..
        } => ContractCall::Offer {
            uid,
            ace_count,
            file_size_kb,
            flow_scope,
            network_setting,
            price,
            deadline,
        },
        ContractCall::Select { suppliers, .. } => ContractCall::Select { uid, suppliers },
        ContractCall::Submit {
            index, deadline, ..
        } => ContractCall::Submit {
            uid,
            index,
            deadline,
        },
        ContractCall::Rate {
            supplier, score, ..
        } => ContractCall::Rate {
            uid,
            supplier,
            score,
        },
        other => other,
    }
}

fn run_tape(market: &mut Marketplace, json_round_trip: bool) -> Vec<CallOutcome> {
    let steps = tape(market);
    let mut outcomes = Vec::new();
    let mut uid = None;
    for (sender, call, advance_after) in steps {
        let call = match uid {
            Some(uid) => patch(call, uid),
            None => call,
        };
        let call = if json_round_trip {
            let text = serde_json::to_string(&call).unwrap();
            serde_json::from_str(&text).unwrap()
        } else {
            call
        };
        let outcome = market.execute(sender, call).unwrap();
        if let CallOutcome::Requested { uid: got, .. } = &outcome {
            uid = Some(*got);
        }
        outcomes.push(outcome);
        market.advance_time(advance_after);
    }
    outcomes
}

#[test]
fn identical_tapes_build_identical_marketplaces() {
    let mut a = fresh();
    let mut b = fresh();
    let outcomes_a = run_tape(&mut a, false);
    let outcomes_b = run_tape(&mut b, true);
    assert_eq!(outcomes_a, outcomes_b);
    assert_eq!(a, b);
    assert_eq!(a.total_wei(), a.chain().genesis_supply());
}

#[test]
fn sweep_refunds_the_silent_supplier_escrow() {
    let mut market = fresh();
    let outcomes = run_tape(&mut market, false);
    let CallOutcome::Swept {
        transitions,
        receipt,
    } = outcomes.last().unwrap()
    else {
        panic!("tape ends with a sweep");
    };
    assert!(receipt.is_some());
    assert_eq!(
        transitions.len(),
        2,
        "refund + request close: {transitions:?}"
    );
    assert_eq!(market.escrow().total(), 0);
}

/// Every committed transaction is reconstructible from view output alone.
#[test]
fn committed_calls_are_witnessed_by_public_records() {
    let mut market = fresh();
    run_tape(&mut market, false);
    let histories: Vec<_> = market
        .request_records()
        .map(|r| market.history(r.uid).unwrap())
        .collect();
    for block in market.chain().blocks() {
        for tx in &block.transactions {
            let witnessed = histories.iter().any(|h| match tx.function {
                Function::Request => {
                    h.request.consumer == tx.sender && h.request.created_at <= block.timestamp
                }
                Function::Offer => h
                    .offers
                    .iter()
                    .any(|o| o.supplier == tx.sender && o.block_number == tx.block_number),
                Function::Select => {
                    h.request.consumer == tx.sender
                        && h.request.status != mudmarket_core::contract::RequestStatus::Open
                }
                Function::Submit => h.submissions.iter().any(|s| s.supplier == tx.sender),
                Function::Rate => {
                    h.request.consumer == tx.sender
                        && h.ratings
                            .iter()
                            .any(|r| matches!(r.score, Score::Explicit(_)))
                }
                Function::Expire => true,
            });
            assert!(
                witnessed,
                "{} by {} in block {} has no public witness",
                tx.function, tx.sender, tx.block_number
            );
        }
    }
}
