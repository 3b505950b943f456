//! SHA-256 digests over canonical byte encodings.
//!
//! Everything that is digested, compared across replicas or written to
//! a ledger goes through the canonical encoding defined here, byte for
//! byte:
//!
//! - `u32` and `u64` are big-endian.
//! - A string is a `u32` byte length followed by its UTF-8 bytes.
//! - A value is a one-byte tag followed by its payload:
//!   `U` (unbound, no payload), `S` + string, `N` + canonical decimal
//!   string, `A` + address string.
//! - A record is a `u32` field count followed by its fields in
//!   lexicographic field-name order, each a string name and a value.
//! - A store is a `u32` record count followed by its records in
//!   lexicographic record-name order, each a string name and a record.
//! - An actor is its address string, state index (`u32`), store, and a
//!   terminated byte (0/1); a world is a `u32` actor count followed by
//!   its actors in address order.
//!
//! No encoding depends on pointer width, endianness of the host, or
//! hash-map iteration order, so digests are stable across runs,
//! processes, and architectures.

use std::fmt;

use sha2::{Digest as _, Sha256};

pub const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest32(pub [u8; DIGEST_LEN]);

impl Digest32 {
    pub const ZERO: Digest32 = Digest32([0u8; DIGEST_LEN]);

    pub fn hex(&self) -> String {
        const HEX: &[u8; 16] = b"0123456789abcdef";
        let mut s = String::with_capacity(DIGEST_LEN * 2);
        for b in self.0 {
            s.push(HEX[(b >> 4) as usize] as char);
            s.push(HEX[(b & 15) as usize] as char);
        }
        s
    }

    pub fn from_hex(s: &str) -> Option<Digest32> {
        fn nibble(b: u8) -> Option<u8> {
            match b {
                b'0'..=b'9' => Some(b - b'0'),
                b'a'..=b'f' => Some(b - b'a' + 10),
                b'A'..=b'F' => Some(b - b'A' + 10),
                _ => None,
            }
        }
        let bytes = s.as_bytes();
        if bytes.len() != DIGEST_LEN * 2 {
            return None;
        }
        let mut out = [0u8; DIGEST_LEN];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = (nibble(bytes[2 * i])? << 4) | nibble(bytes[2 * i + 1])?;
        }
        Some(Digest32(out))
    }
}

impl fmt::Display for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

pub fn sha256(bytes: &[u8]) -> Digest32 {
    let mut h = Sha256::new();
    h.update(bytes);
    Digest32(h.finalize().into())
}

/// Keyed authenticator tag: SHA-256 over key || message bytes.
pub fn keyed_tag(key: &Digest32, message: &[u8]) -> Digest32 {
    let mut h = Sha256::new();
    h.update(key.0);
    h.update(message);
    Digest32(h.finalize().into())
}

pub fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_be_bytes());
}

pub fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_be_bytes());
}

pub fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}
