//! hzl: a declarative smart-contract platform built from actors and
//! state machines.
//!
//! Contracts are written in a small declarative language (`.hzl`): an
//! actor declares data records and a state model whose handlers map
//! message receipts to all-or-nothing transitions, record updates and
//! outbound messages. The same compiled contract runs unchanged on a
//! single node for testing ([`runtime`]) or replicated in lockstep
//! across a simulated Byzantine-fault-tolerant node network
//! ([`replication`]), with every transaction lifecycle recorded in a
//! hash-chained ledger ([`ledger`]). Because behaviour is declared
//! rather than programmed, an actor's protocol can be extracted and
//! compared mechanically ([`analyzer`]), and every name can be given a
//! formal meaning through ontology bindings ([`ontology`]).
//!
//! Start with the runnable examples (`cargo run --example
//! single_node_run`) or the `hzl` command-line tool.

pub mod analyzer;
pub mod cli;
pub mod decimal;
pub mod diag;
pub mod digest;
pub mod lang;
pub mod ledger;
pub mod machine;
pub mod ontology;
pub mod replication;
pub mod runtime;
pub mod span;
