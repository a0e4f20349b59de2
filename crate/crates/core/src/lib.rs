//! Deterministic, desk-scale marketplace for exchanging IoT expected-behavior
//! (MUD) profiles.
//!
//! The crate simulates the full exchange pipeline in memory:
//!
//! * [`ledger`] — a single-chain ledger with wei balances, one-transaction
//!   blocks, a logical clock, and gas-fee accounting;
//! * [`contract`] — the five-function exchange state machine (request, offer,
//!   select, submit, rate) with escrow, deadlines, and an expiry sweep;
//! * [`offstore`] — a content-addressed store holding MUD documents off chain,
//!   referenced on chain only by their digest;
//! * [`mudfile`] — an RFC 8520-shaped MUD profile model with parsing,
//!   canonical serialization, and the four quality variants;
//! * [`market`] — offer-selection strategies, the rating policy, and gas/cost
//!   reporting;
//! * [`scenario`] — a scripted runner that replays the eleven demonstration
//!   scenarios and emits diffable transcripts.
//!
//! Everything is `no_std + alloc`: no IO, no wall clock, no ambient
//! randomness. All randomness is drawn from explicitly seeded ChaCha8 streams
//! so that identical inputs always produce byte-identical transcripts.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod canon;
pub mod contract;
mod hexid;
pub mod ledger;
pub mod market;
pub mod mudfile;
pub mod offstore;
pub mod scenario;
#[cfg(feature = "testutil")]
pub mod sim;

pub use hexid::ParseIdError;
