//! Append-only, hash-chained transaction ledger.
//!
//! Every message receipt a node executes leaves a lifecycle trail:
//! ATTEMPTED when the receipt is dequeued for execution, LIVE
//! immediately before the step runs, and COMPLETED or FAILED once the
//! step's status is known (rejected receipts record as FAILED with a
//! reason code). Entries chain by hash, so any mutation of history is
//! detectable and any prefix of a valid ledger is itself valid.
//!
//! # File format (`.ledger`)
//!
//! One entry per line, ten `|`-separated fields, newline-terminated:
//!
//! ```text
//! index|prevHash|seq|actor|messageType|payloadDigest|status|reason|stateDigest|entryHash
//! ```
//!
//! `index` is a decimal counter gap-free from 0; hashes are 64 hex
//! characters; `status` is one of ATTEMPTED, LIVE, COMPLETED, FAILED;
//! `reason` is empty except on FAILED entries; `stateDigest` is the
//! acting actor's post-event digest on terminal entries and all zeros
//! otherwise. `entryHash` is the SHA-256 of the line's first nine
//! fields joined by `|` (no trailing separator); `prevHash` equals the
//! predecessor's `entryHash`, with all zeros at genesis. Actor and
//! message names must not contain `|` or newlines.

use std::fmt;

use thiserror::Error;

use crate::digest::{sha256, Digest32};
use crate::machine::ActorAddress;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EntryStatus {
    Attempted,
    Live,
    Completed,
    Failed,
}

impl EntryStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            EntryStatus::Attempted => "ATTEMPTED",
            EntryStatus::Live => "LIVE",
            EntryStatus::Completed => "COMPLETED",
            EntryStatus::Failed => "FAILED",
        }
    }

    pub fn parse(s: &str) -> Option<EntryStatus> {
        match s {
            "ATTEMPTED" => Some(EntryStatus::Attempted),
            "LIVE" => Some(EntryStatus::Live),
            "COMPLETED" => Some(EntryStatus::Completed),
            "FAILED" => Some(EntryStatus::Failed),
            _ => None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, EntryStatus::Completed | EntryStatus::Failed)
    }
}

impl fmt::Display for EntryStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub index: u64,
    pub prev_hash: Digest32,
    /// Replication sequence; 0 on a single node.
    pub seq: u64,
    pub actor: ActorAddress,
    pub message_type: String,
    pub payload_digest: Digest32,
    pub status: EntryStatus,
    /// Failure reason code; empty unless status is FAILED.
    pub reason: String,
    pub state_digest_after: Digest32,
    pub entry_hash: Digest32,
}

impl LedgerEntry {
    /// The hashed portion: the first nine fields joined by '|'.
    fn hash_input(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.index,
            self.prev_hash.hex(),
            self.seq,
            self.actor,
            self.message_type,
            self.payload_digest.hex(),
            self.status,
            self.reason,
            self.state_digest_after.hex()
        )
    }

    fn compute_hash(&self) -> Digest32 {
        sha256(self.hash_input().as_bytes())
    }

    pub fn to_line(&self) -> String {
        format!("{}|{}", self.hash_input(), self.entry_hash.hex())
    }
}

/// One lifecycle event, before chaining.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEvent {
    pub seq: u64,
    pub actor: ActorAddress,
    pub message_type: String,
    pub payload_digest: Digest32,
    pub status: EntryStatus,
    pub reason: String,
    pub state_digest_after: Digest32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ledger {
    entries: Vec<LedgerEntry>,
}

impl Ledger {
    pub fn new() -> Self {
        Ledger::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn tip_hash(&self) -> Digest32 {
        self.entries
            .last()
            .map(|e| e.entry_hash)
            .unwrap_or(Digest32::ZERO)
    }

    /// Extend the chain with one event. Actor and message names must
    /// stay clear of the line format's separators.
    pub fn append(&mut self, event: LedgerEvent) -> &LedgerEntry {
        debug_assert!(
            !event.actor.0.contains(['|', '\n'])
                && !event.message_type.contains(['|', '\n'])
                && !event.reason.contains('\n'),
            "ledger fields must not contain separators"
        );
        let mut entry = LedgerEntry {
            index: self.entries.len() as u64,
            prev_hash: self.tip_hash(),
            seq: event.seq,
            actor: event.actor,
            message_type: event.message_type,
            payload_digest: event.payload_digest,
            status: event.status,
            reason: event.reason,
            state_digest_after: event.state_digest_after,
            entry_hash: Digest32::ZERO,
        };
        entry.entry_hash = entry.compute_hash();
        self.entries.push(entry);
        self.entries.last().expect("just pushed")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_line());
            out.push('\n');
        }
        out.into_bytes()
    }

    /// Order-preserving filtered view.
    pub fn query(&self, filter: &LedgerFilter) -> Vec<&LedgerEntry> {
        self.entries.iter().filter(|e| filter.matches(e)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LedgerFilter {
    pub actor: Option<ActorAddress>,
    pub status: Option<EntryStatus>,
    pub seq_from: Option<u64>,
    pub seq_to: Option<u64>,
}

impl LedgerFilter {
    pub fn matches(&self, e: &LedgerEntry) -> bool {
        if let Some(actor) = &self.actor {
            if &e.actor != actor {
                return false;
            }
        }
        if let Some(status) = self.status {
            if e.status != status {
                return false;
            }
        }
        if let Some(from) = self.seq_from {
            if e.seq < from {
                return false;
            }
        }
        if let Some(to) = self.seq_to {
            if e.seq > to {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("ledger line {line}: {what}")]
pub struct LedgerParseError {
    /// 1-based line number.
    pub line: u64,
    pub what: String,
}

/// Strict line parser: exactly ten fields, exact hex widths, known
/// status tokens. Any stray byte fails the parse.
pub fn parse_ledger(bytes: &[u8]) -> Result<Ledger, LedgerParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| LedgerParseError {
        line: 0,
        what: format!("not UTF-8: {e}"),
    })?;
    let mut entries = Vec::new();
    if !text.is_empty() && !text.ends_with('\n') {
        return Err(LedgerParseError {
            line: text.lines().count() as u64,
            what: "missing final newline".into(),
        });
    }
    for (ix, line) in text.lines().enumerate() {
        entries.push(parse_entry_line(line, ix as u64 + 1)?);
    }
    Ok(Ledger { entries })
}

fn parse_entry_line(line: &str, line_no: u64) -> Result<LedgerEntry, LedgerParseError> {
    let err = |what: &str| LedgerParseError {
        line: line_no,
        what: what.into(),
    };
    let parts: Vec<&str> = line.split('|').collect();
    if parts.len() != 10 {
        return Err(err(&format!("expected 10 fields, found {}", parts.len())));
    }
    let index: u64 = parts[0].parse().map_err(|_| err("bad index"))?;
    if parts[0] != index.to_string() {
        return Err(err("non-canonical index"));
    }
    let prev_hash = Digest32::from_hex(parts[1]).ok_or_else(|| err("bad prevHash"))?;
    let seq: u64 = parts[2].parse().map_err(|_| err("bad seq"))?;
    if parts[2] != seq.to_string() {
        return Err(err("non-canonical seq"));
    }
    let actor = parts[3];
    let message_type = parts[4];
    if actor.is_empty() || message_type.is_empty() {
        return Err(err("empty actor or messageType"));
    }
    let payload_digest = Digest32::from_hex(parts[5]).ok_or_else(|| err("bad payloadDigest"))?;
    let status = EntryStatus::parse(parts[6]).ok_or_else(|| err("bad status"))?;
    let reason = parts[7].to_string();
    if !reason.is_empty() && status != EntryStatus::Failed {
        return Err(err("reason on non-FAILED entry"));
    }
    let state_digest_after = Digest32::from_hex(parts[8]).ok_or_else(|| err("bad stateDigest"))?;
    let entry_hash = Digest32::from_hex(parts[9]).ok_or_else(|| err("bad entryHash"))?;
    Ok(LedgerEntry {
        index,
        prev_hash,
        seq,
        actor: ActorAddress::new(actor),
        message_type: message_type.to_string(),
        payload_digest,
        status,
        reason,
        state_digest_after,
        entry_hash,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub ok: bool,
    pub entries_checked: u64,
    /// Index (or line) of the first bad entry when not ok.
    pub first_bad: Option<u64>,
    pub detail: String,
}

impl VerifyReport {
    fn all_good(entries: u64) -> Self {
        VerifyReport {
            ok: true,
            entries_checked: entries,
            first_bad: None,
            detail: "OK".into(),
        }
    }

    fn bad(first_bad: u64, entries: u64, detail: String) -> Self {
        VerifyReport {
            ok: false,
            entries_checked: entries,
            first_bad: Some(first_bad),
            detail,
        }
    }
}

/// Verify a parsed chain: indices gap-free from 0, every entryHash
/// recomputes, every prevHash links.
pub fn verify_chain(ledger: &Ledger) -> VerifyReport {
    let mut prev = Digest32::ZERO;
    for (ix, entry) in ledger.entries.iter().enumerate() {
        let ix = ix as u64;
        if entry.index != ix {
            return VerifyReport::bad(ix, ix, format!("index {} at position {ix}", entry.index));
        }
        if entry.prev_hash != prev {
            return VerifyReport::bad(ix, ix, format!("broken link at index {ix}"));
        }
        if entry.compute_hash() != entry.entry_hash {
            return VerifyReport::bad(ix, ix, format!("entry hash mismatch at index {ix}"));
        }
        prev = entry.entry_hash;
    }
    VerifyReport::all_good(ledger.len() as u64)
}

/// Parse and verify raw bytes; malformed input counts as detection.
/// Parsing and chain checks interleave line by line so verification
/// stops at the first bad byte.
pub fn verify_bytes(bytes: &[u8]) -> VerifyReport {
    let Ok(text) = std::str::from_utf8(bytes) else {
        return VerifyReport::bad(0, 0, "unparseable: not UTF-8".into());
    };
    if !text.is_empty() && !text.ends_with('\n') {
        return VerifyReport::bad(
            text.lines().count() as u64,
            0,
            "unparseable: missing final newline".into(),
        );
    }
    let mut prev = Digest32::ZERO;
    let mut checked = 0u64;
    for (ix, line) in text.lines().enumerate() {
        let ix = ix as u64;
        let entry = match parse_entry_line(line, ix + 1) {
            Ok(e) => e,
            Err(e) => return VerifyReport::bad(ix, checked, format!("unparseable: {e}")),
        };
        if entry.index != ix {
            return VerifyReport::bad(
                ix,
                checked,
                format!("index {} at position {ix}", entry.index),
            );
        }
        if entry.prev_hash != prev {
            return VerifyReport::bad(ix, checked, format!("broken link at index {ix}"));
        }
        if entry.compute_hash() != entry.entry_hash {
            return VerifyReport::bad(ix, checked, format!("entry hash mismatch at index {ix}"));
        }
        prev = entry.entry_hash;
        checked += 1;
    }
    VerifyReport::all_good(checked)
}
