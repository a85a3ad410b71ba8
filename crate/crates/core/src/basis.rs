use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest qubit count representable by [`BasisState`].
pub const MAX_QUBITS: usize = 63;

/// A computational basis state `x ∈ {0,1}^n`, bit `q` holding qubit `q`.
///
/// Textual form puts qubit 0 first, so `"10"` has qubit 0 set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BasisState(pub u64);

impl BasisState {
    #[inline]
    pub fn bit(self, q: usize) -> bool {
        (self.0 >> q) & 1 == 1
    }

    #[inline]
    pub fn flip(self, q: usize) -> Self {
        BasisState(self.0 ^ (1 << q))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn to_bitstring(self, n: usize) -> String {
        (0..n).map(|q| if self.bit(q) { '1' } else { '0' }).collect()
    }

    /// Parses a string of `0`/`1` characters, qubit 0 first.
    pub fn parse(s: &str) -> Result<(Self, usize)> {
        let s = s.trim();
        if s.is_empty() || s.len() > MAX_QUBITS {
            return Err(Error::validation(
                "bitstring",
                format!("length must be in 1..={MAX_QUBITS}, got {}", s.len()),
            ));
        }
        let mut x = 0u64;
        for (q, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => x |= 1 << q,
                other => {
                    return Err(Error::validation(
                        "bitstring",
                        format!("unexpected character {other:?} at position {q}"),
                    ))
                }
            }
        }
        Ok((BasisState(x), s.len()))
    }

    /// Key whose numeric order is the lexicographic order of [`Self::to_bitstring`].
    pub fn lex_key(self, n: usize) -> u64 {
        (0..n).fold(0u64, |acc, q| (acc << 1) | u64::from(self.bit(q)))
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitstring_roundtrip() {
        let (x, n) = BasisState::parse("1011").unwrap();
        assert_eq!(n, 4);
        assert_eq!(x.0, 0b1101);
        assert_eq!(x.to_bitstring(4), "1011");
    }

    #[test]
    fn lex_key_orders_like_strings() {
        let n = 5;
        let mut states: Vec<BasisState> = (0..32).map(BasisState).collect();
        states.sort_by_key(|s| s.lex_key(n));
        let strings: Vec<String> = states.iter().map(|s| s.to_bitstring(n)).collect();
        let mut sorted = strings.clone();
        sorted.sort();
        assert_eq!(strings, sorted);
    }

    #[test]
    fn rejects_bad_characters() {
        assert!(BasisState::parse("01a").is_err());
        assert!(BasisState::parse("").is_err());
    }
}
