//! Fixed-width hex identifiers (addresses, UIDs, store indexes).

use core::fmt;

/// Failure to parse a fixed-width hex identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseIdError {
    kind: &'static str,
    expected_hex_len: usize,
}

impl fmt::Display for ParseIdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "invalid {}: expected {} hex characters",
            self.kind, self.expected_hex_len
        )
    }
}

impl core::error::Error for ParseIdError {}

pub(crate) fn parse_fixed<const N: usize>(
    kind: &'static str,
    s: &str,
) -> Result<[u8; N], ParseIdError> {
    let err = ParseIdError {
        kind,
        expected_hex_len: 2 * N,
    };
    let s = s.strip_prefix("0x").unwrap_or(s);
    let mut out = [0u8; N];
    if s.len() != 2 * N {
        return Err(err);
    }
    hex::decode_to_slice(s, &mut out).map_err(|_| err)?;
    Ok(out)
}
