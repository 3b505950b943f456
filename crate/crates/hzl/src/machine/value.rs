//! Runtime values, record instances and message envelopes.
//!
//! Values are strings, exact decimals and opaque actor addresses;
//! equality is exact and no floating point exists anywhere. `Unbound`
//! is the runtime form of a `{?}` field initializer.

use std::collections::BTreeMap;
use std::fmt;

use crate::decimal::Decimal;
use crate::digest::{put_str, put_u32, put_u64, sha256, Digest32};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActorAddress(pub String);

impl ActorAddress {
    pub fn new(s: impl Into<String>) -> Self {
        ActorAddress(s.into())
    }
}

impl fmt::Display for ActorAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Unbound,
    Str(String),
    Num(Decimal),
    Address(ActorAddress),
}

impl Value {
    pub fn is_unbound(&self) -> bool {
        matches!(self, Value::Unbound)
    }

    pub fn num(text: &str) -> Value {
        Value::Num(text.parse().expect("valid decimal literal"))
    }

    /// Canonical text form; `None` for unbound values.
    pub fn render(&self) -> Option<String> {
        match self {
            Value::Unbound => None,
            Value::Str(s) => Some(s.clone()),
            Value::Num(d) => Some(d.to_string()),
            Value::Address(a) => Some(a.0.clone()),
        }
    }

    pub fn canonical_write(&self, buf: &mut Vec<u8>) {
        match self {
            Value::Unbound => buf.push(b'U'),
            Value::Str(s) => {
                buf.push(b'S');
                put_str(buf, s);
            }
            Value::Num(d) => {
                buf.push(b'N');
                put_str(buf, &d.to_string());
            }
            Value::Address(a) => {
                buf.push(b'A');
                put_str(buf, &a.0);
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.render() {
            Some(s) => f.write_str(&s),
            None => f.write_str("?"),
        }
    }
}

/// A record instance: field name to value. BTreeMap keeps canonical
/// (lexicographic) order everywhere the contents are serialized.
pub type Record = BTreeMap<String, Value>;

pub fn record_canonical_bytes(rec: &Record) -> Vec<u8> {
    let mut buf = Vec::new();
    write_record(&mut buf, rec);
    buf
}

pub fn write_record(buf: &mut Vec<u8>, rec: &Record) {
    put_u32(buf, rec.len() as u32);
    for (name, value) in rec {
        put_str(buf, name);
        value.canonical_write(buf);
    }
}

pub fn record_digest(rec: &Record) -> Digest32 {
    sha256(&record_canonical_bytes(rec))
}

/// A routed message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub to: ActorAddress,
    pub message_type: String,
    pub payload: Record,
    /// Replication sequence number; `None` until ordered.
    pub seq: Option<u64>,
    pub sender: ActorAddress,
}

impl Envelope {
    pub fn new(
        sender: ActorAddress,
        to: ActorAddress,
        message_type: impl Into<String>,
        payload: Record,
    ) -> Self {
        Envelope {
            to,
            message_type: message_type.into(),
            payload,
            seq: None,
            sender,
        }
    }

    /// Canonical bytes of the routable content, excluding the sequence
    /// number (which is assigned by the ordering protocol).
    pub fn content_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        put_str(&mut buf, &self.to.0);
        put_str(&mut buf, &self.sender.0);
        put_str(&mut buf, &self.message_type);
        write_record(&mut buf, &self.payload);
        buf
    }

    pub fn content_digest(&self) -> Digest32 {
        sha256(&self.content_bytes())
    }

    pub fn payload_digest(&self) -> Digest32 {
        record_digest(&self.payload)
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut buf = self.content_bytes();
        match self.seq {
            None => buf.push(0),
            Some(s) => {
                buf.push(1);
                put_u64(&mut buf, s);
            }
        }
        buf
    }
}
