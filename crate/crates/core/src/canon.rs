//! Canonical call-argument serialization.
//!
//! Every argument is rendered as text, UTF-8 encoded, and prefixed with a
//! 4-byte big-endian length; fields are concatenated in declaration order.
//! The byte length of this encoding is the transaction's on-chain payload
//! size recorded in receipts.

use alloc::vec::Vec;

pub fn encode(fields: &[&str]) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_len(fields) as usize);
    for field in fields {
        out.extend_from_slice(&(field.len() as u32).to_be_bytes());
        out.extend_from_slice(field.as_bytes());
    }
    out
}

pub fn encoded_len(fields: &[&str]) -> u64 {
    fields.iter().map(|f| 4 + f.len() as u64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_matches_encoding() {
        let fields = ["amazon", "", "echo", "2000000000000000000"];
        assert_eq!(encode(&fields).len() as u64, encoded_len(&fields));
    }

    #[test]
    fn layout_is_length_prefixed_big_endian() {
        let encoded = encode(&["ab", "c"]);
        assert_eq!(encoded, b"\x00\x00\x00\x02ab\x00\x00\x00\x01c");
    }

    #[test]
    fn empty_argument_list_is_zero_bytes() {
        assert_eq!(encoded_len(&[]), 0);
        assert!(encode(&[]).is_empty());
    }
}
