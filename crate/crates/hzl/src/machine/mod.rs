//! Executable state machines and their single-step semantics.
//!
//! [`compile`] turns a validated [`ActorDefinition`] into a
//! [`CompiledMachine`] whose action programs hold only index-based
//! references, and [`step`] defines what one message receipt does: one
//! envelope in, one all-or-nothing [`TransitionResult`] out. A step
//! that fails or is rejected leaves state and store exactly as they
//! were and sends nothing.
//!
//! Transition semantics: a handler program runs to completion first;
//! the last `transitionTo` wins. Leaving a state runs its `#Exit`
//! program, then the state switches, then the new state's `#Enter`
//! program runs; sends keep their execution order across the whole
//! sequence. An Enter program may itself transition, bounded to 8
//! chained Enter-triggered transitions per step. Transition requests
//! inside `#Exit` programs are discarded. `transitionTo _` holds the
//! current state and runs neither Exit nor Enter; naming the current
//! state explicitly re-enters it.
//!
//! [`ActorDefinition`]: crate::lang::ActorDefinition

pub mod behavior;
mod compile;
mod step;
#[cfg(test)]
pub(crate) mod tests;
mod unify;
mod value;

pub use behavior::{
    compose_behaviors, parse_fragments, BehaviorFragment, ComposeError, GuardClause, GuardOperand,
    Interceptor, InterceptorBody, Pattern, Phase,
};
pub use compile::{compile, CompileError};
pub use step::{bootstrap, bootstrap_with_store, step};
pub use unify::{unify_records, SchemaMismatchError, UnifyFail, UnifyFailKind, UnifyOutcome};
pub use value::{
    record_canonical_bytes, record_digest, write_record, ActorAddress, Envelope, Record, Value,
};

use std::collections::BTreeMap;
use std::fmt;

use crate::digest::{put_str, put_u32, sha256, Digest32};

/// Layout of one declared record: field names in declaration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordSchema {
    pub name: String,
    pub fields: Vec<String>,
    pub initial: Vec<Value>,
}

impl RecordSchema {
    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f == name)
    }
}

/// An executable contract machine. Immutable once compiled and safe to
/// share; all mutable execution state lives in [`DataStore`] values
/// owned by the caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledMachine {
    pub states: Vec<String>,
    pub initial_state: usize,
    pub records: Vec<RecordSchema>,
    pub(crate) handlers: BTreeMap<(usize, String), Program>,
    pub(crate) enter: Vec<Program>,
    pub(crate) exit: Vec<Program>,
    pub(crate) interceptors: BTreeMap<(usize, String), InterceptorSet>,
}

pub(crate) type Program = Vec<Op>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Op {
    Transition(Target),
    MapPayload {
        rec: usize,
    },
    Match {
        plan: MatchPlan,
        on_success: Program,
        on_fail: Program,
    },
    Send {
        rec: usize,
        field: Option<usize>,
        template: CompiledTemplate,
    },
    Terminate,
    Nop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Target {
    Goto(usize),
    Stay,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum MatchPlan {
    /// Field-name sets do not line up; executing the match fails the step.
    Misaligned(String),
    Aligned {
        left: usize,
        right: usize,
        /// (field name, left index, right index, target index), sorted by name.
        pairs: Vec<(String, usize, usize, Option<usize>)>,
        into_rec: Option<usize>,
    },
}

/// A message template compiled to field indices, plus the message type
/// its sends carry (derived from the leading literal text).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledTemplate {
    pub message_type: String,
    pub(crate) segments: Vec<CompiledSegment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum CompiledSegment {
    Text(String),
    Field(usize, usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct InterceptorSet {
    pub guards: Vec<(String, Vec<GuardCheck>)>,
    pub befores: Vec<(String, Program)>,
    pub afters: Vec<(String, Program)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct GuardCheck {
    pub lhs: GuardValue,
    pub op: CmpOp,
    pub rhs: GuardValue,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum GuardValue {
    Store(usize, usize),
    Payload(String),
    Lit(Value),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        })
    }
}

/// The mutable data of one actor instance: record values laid out
/// parallel to the machine's record schemas. Steps never mutate a
/// store in place; each step produces a fresh one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataStore {
    pub records: Vec<Vec<Value>>,
}

/// The all-or-nothing outcome of one message receipt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionResult {
    pub next_state: usize,
    pub new_store: DataStore,
    pub outbox: Vec<Envelope>,
    pub terminated: bool,
    pub status: StepStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepStatus {
    Completed,
    Failed(FailReason),
    Rejected(RejectReason),
}

impl StepStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, StepStatus::Completed)
    }

    /// Stable reason code used in traces, ledgers and reports.
    pub fn code(&self) -> String {
        match self {
            StepStatus::Completed => "completed".into(),
            StepStatus::Failed(r) => format!("failed:{r}"),
            StepStatus::Rejected(r) => format!("rejected:{r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailReason {
    /// Payload carried a field the target record does not declare.
    UnknownField(String),
    /// Send target does not hold an address value.
    BadAddress(String),
    UnboundFieldInTemplate(String),
    /// More than 8 chained Enter-triggered transitions.
    TransitionLoop,
    SchemaMismatch(String),
    PolicyVeto(String),
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailReason::UnknownField(name) => write!(f, "unknown-field({name})"),
            FailReason::BadAddress(what) => write!(f, "bad-address({what})"),
            FailReason::UnboundFieldInTemplate(what) => {
                write!(f, "unbound-template-field({what})")
            }
            FailReason::TransitionLoop => f.write_str("transition-loop"),
            FailReason::SchemaMismatch(what) => write!(f, "schema-mismatch({what})"),
            FailReason::PolicyVeto(name) => write!(f, "policy-veto({name})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    NoHandler,
    Terminated,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::NoHandler => "no-handler",
            RejectReason::Terminated => "terminated",
        })
    }
}

impl CompiledMachine {
    /// Case-insensitive state lookup, matching `$ref` resolution.
    pub fn state_index(&self, name: &str) -> Option<usize> {
        let lower = name.to_lowercase();
        self.states.iter().position(|s| s.to_lowercase() == lower)
    }

    pub fn record_index(&self, name: &str) -> Option<usize> {
        self.records.iter().position(|r| r.name == name)
    }

    /// The protocol surface: every (state, message type) pair that a
    /// step accepts with a status other than Rejected.
    pub fn handler_domain(&self) -> Vec<(usize, String)> {
        self.handlers.keys().cloned().collect()
    }

    pub fn has_handler(&self, state: usize, message_type: &str) -> bool {
        self.handlers
            .contains_key(&(state, message_type.to_string()))
    }

    pub fn initial_store(&self) -> DataStore {
        DataStore {
            records: self.records.iter().map(|r| r.initial.clone()).collect(),
        }
    }

    /// Named view of one record instance.
    pub fn named_record(&self, store: &DataStore, rec: usize) -> Record {
        self.records[rec]
            .fields
            .iter()
            .cloned()
            .zip(store.records[rec].iter().cloned())
            .collect()
    }

    /// Named view of a whole store.
    pub fn named_store(&self, store: &DataStore) -> BTreeMap<String, Record> {
        (0..self.records.len())
            .map(|i| (self.records[i].name.clone(), self.named_record(store, i)))
            .collect()
    }

    /// Canonical store bytes: records in lexicographic name order, each
    /// with fields in lexicographic order and length-prefixed values.
    pub fn store_canonical_bytes(&self, store: &DataStore) -> Vec<u8> {
        let mut order: Vec<usize> = (0..self.records.len()).collect();
        order.sort_by(|&a, &b| self.records[a].name.cmp(&self.records[b].name));
        let mut buf = Vec::new();
        put_u32(&mut buf, order.len() as u32);
        for rec in order {
            put_str(&mut buf, &self.records[rec].name);
            let named = self.named_record(store, rec);
            write_record(&mut buf, &named);
        }
        buf
    }

    /// Digest of one actor's observable condition.
    pub fn actor_digest(&self, state: usize, store: &DataStore, terminated: bool) -> Digest32 {
        let mut buf = Vec::new();
        put_u32(&mut buf, state as u32);
        buf.extend_from_slice(&self.store_canonical_bytes(store));
        buf.push(terminated as u8);
        sha256(&buf)
    }

    /// Canonical bytes of a step result: next state (`u32`), store,
    /// outbox count (`u32`) with each envelope's canonical bytes, a
    /// terminated byte, and the status code string. Equal inputs to
    /// [`step`] yield digest-identical results.
    pub fn result_canonical_bytes(&self, result: &TransitionResult) -> Vec<u8> {
        let mut buf = Vec::new();
        put_u32(&mut buf, result.next_state as u32);
        buf.extend_from_slice(&self.store_canonical_bytes(&result.new_store));
        put_u32(&mut buf, result.outbox.len() as u32);
        for env in &result.outbox {
            let bytes = env.canonical_bytes();
            put_u32(&mut buf, bytes.len() as u32);
            buf.extend_from_slice(&bytes);
        }
        buf.push(result.terminated as u8);
        put_str(&mut buf, &result.status.code());
        buf
    }

    pub fn result_digest(&self, result: &TransitionResult) -> Digest32 {
        sha256(&self.result_canonical_bytes(result))
    }

    /// Set a field by name; used for spawn-time initial payloads.
    pub fn set_field(
        &self,
        store: &mut DataStore,
        record: &str,
        field: &str,
        value: Value,
    ) -> bool {
        let Some(rec) = self.record_index(record) else {
            return false;
        };
        let Some(ix) = self.records[rec].field_index(field) else {
            return false;
        };
        store.records[rec][ix] = value;
        true
    }

    pub fn get_field<'a>(
        &self,
        store: &'a DataStore,
        record: &str,
        field: &str,
    ) -> Option<&'a Value> {
        let rec = self.record_index(record)?;
        let ix = self.records[rec].field_index(field)?;
        store.records[rec].get(ix)
    }

    /// Canonical digest of the compiled machine; equal definitions
    /// compile to digest-equal machines.
    pub fn machine_digest(&self) -> Digest32 {
        sha256(format!("{self:?}").as_bytes())
    }

    /// Guard comparison used by policy fragments: exact equality on any
    /// value kind, ordered comparison on decimals only. Missing or
    /// unbound operands never satisfy a clause.
    pub(crate) fn guard_holds(op: CmpOp, lhs: Option<&Value>, rhs: Option<&Value>) -> bool {
        let (Some(a), Some(b)) = (lhs, rhs) else {
            return false;
        };
        if a.is_unbound() || b.is_unbound() {
            return false;
        }
        match op {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge => match (a, b) {
                (Value::Num(x), Value::Num(y)) => match op {
                    CmpOp::Lt => x < y,
                    CmpOp::Le => x <= y,
                    CmpOp::Gt => x > y,
                    CmpOp::Ge => x >= y,
                    _ => unreachable!(),
                },
                _ => false,
            },
        }
    }
}

/// Derive the message type a composed send carries: the leading
/// literal text up to the first ':', alphanumerics only.
pub(crate) fn template_message_type(leading_text: Option<&str>) -> String {
    let name: String = leading_text
        .unwrap_or("")
        .split(':')
        .next()
        .unwrap_or("")
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect();
    if name.is_empty() {
        "msg".to_string()
    } else {
        name
    }
}
