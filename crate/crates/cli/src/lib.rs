//! Library side of the `mudmarket` binary: configuration, the chain journal
//! with verified replay, and the disk-backed content store. The binary adds
//! argument parsing and printing on top.

pub mod config;
pub mod error;
pub mod fsstore;
pub mod journal;
