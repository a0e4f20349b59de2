//! Content-addressed off-chain store for MUD documents.
//!
//! Content is keyed by the SHA-256 of its bytes, so equal content always maps
//! to the same index, any manipulation of stored bytes changes the index, and
//! reads are verified against the requested index before being returned. The
//! index is the only MUD reference that ever appears on chain.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::hexid::{self, ParseIdError};

/// 256-bit content hash, rendered as 64 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StoreIndex([u8; 32]);

impl StoreIndex {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for StoreIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for StoreIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StoreIndex({self})")
    }
}

impl FromStr for StoreIndex {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        hexid::parse_fixed::<32>("store index", s).map(Self)
    }
}

impl Serialize for StoreIndex {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for StoreIndex {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Content hash of a byte payload.
pub fn digest(content: &[u8]) -> StoreIndex {
    let d = Sha256::digest(content);
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&d);
    StoreIndex(bytes)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreError {
    /// Empty content is unstorable.
    EmptyContent,
    NotFound(StoreIndex),
    /// Stored bytes no longer hash back to their index.
    Corrupt {
        index: StoreIndex,
        actual: StoreIndex,
    },
    /// Filesystem failure in a disk-backed store.
    Io(String),
}

impl fmt::Display for StoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoreError::EmptyContent => write!(f, "empty content is unstorable"),
            StoreError::NotFound(index) => write!(f, "no blob stored under {index}"),
            StoreError::Corrupt { index, actual } => {
                write!(f, "integrity failure: blob {index} hashes to {actual}")
            }
            StoreError::Io(msg) => write!(f, "store io error: {msg}"),
        }
    }
}

impl core::error::Error for StoreError {}

/// A content-addressed blob store. Stored blobs are never mutated in place;
/// re-putting identical bytes returns the identical index.
pub trait MudStore {
    fn put(&mut self, content: &[u8]) -> Result<StoreIndex, StoreError>;

    /// Returns the stored bytes after verifying they still hash to `index`.
    fn get(&self, index: &StoreIndex) -> Result<Vec<u8>, StoreError>;

    /// True iff `content` hashes to `index`. Empty content is unstorable, so
    /// it never verifies.
    fn verify(&self, index: &StoreIndex, content: &[u8]) -> bool {
        !content.is_empty() && digest(content) == *index
    }
}

/// In-memory store used by the scenario runner and tests.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemStore {
    blobs: BTreeMap<StoreIndex, Vec<u8>>,
}

impl MemStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.blobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blobs.is_empty()
    }
}

impl MudStore for MemStore {
    fn put(&mut self, content: &[u8]) -> Result<StoreIndex, StoreError> {
        if content.is_empty() {
            return Err(StoreError::EmptyContent);
        }
        let index = digest(content);
        self.blobs.entry(index).or_insert_with(|| content.to_vec());
        Ok(index)
    }

    fn get(&self, index: &StoreIndex) -> Result<Vec<u8>, StoreError> {
        let content = self.blobs.get(index).ok_or(StoreError::NotFound(*index))?;
        let actual = digest(content);
        if actual != *index {
            return Err(StoreError::Corrupt {
                index: *index,
                actual,
            });
        }
        Ok(content.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_matches_external_sha256() {
        // sha256("hello"), cross-checked with an independent tool.
        assert_eq!(
            digest(b"hello").to_string(),
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
    }

    #[test]
    fn put_is_idempotent() {
        let mut store = MemStore::new();
        let a = store.put(b"mud document").unwrap();
        let b = store.put(b"mud document").unwrap();
        assert_eq!(a, b);
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn one_byte_flip_changes_the_index() {
        let mut store = MemStore::new();
        let original = store.put(b"mud document").unwrap();
        let tampered = store.put(b"mud cocument").unwrap();
        assert_ne!(original, tampered);
    }

    #[test]
    fn get_round_trips() {
        let mut store = MemStore::new();
        let content = b"{ \"ietf-mud:mud\": {} }".to_vec();
        let index = store.put(&content).unwrap();
        assert_eq!(store.get(&index).unwrap(), content);
    }

    #[test]
    fn get_unknown_index_is_not_found() {
        let store = MemStore::new();
        let index = digest(b"never stored");
        assert_eq!(store.get(&index), Err(StoreError::NotFound(index)));
    }

    #[test]
    fn empty_content_is_rejected_and_never_verifies() {
        let mut store = MemStore::new();
        assert_eq!(store.put(b""), Err(StoreError::EmptyContent));
        let index = digest(b"");
        assert!(!store.verify(&index, b""));
    }

    #[test]
    fn verify_detects_bit_flips() {
        let store = MemStore::new();
        let content = b"expected behavior".to_vec();
        let index = digest(&content);
        assert!(store.verify(&index, &content));
        let mut flipped = content.clone();
        flipped[3] ^= 0x01;
        assert!(!store.verify(&index, &flipped));
    }

    #[test]
    fn index_round_trips_through_hex() {
        let index = digest(b"x");
        let parsed: StoreIndex = index.to_string().parse().unwrap();
        assert_eq!(parsed, index);
        assert_eq!(index.to_string().len(), 64);
    }
}
