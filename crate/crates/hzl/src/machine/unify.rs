//! Record unification.
//!
//! Two record instances over the same field set unify when every field
//! has at least one bound side and bound sides agree; the unified field
//! takes the bound value. Success additionally requires the unified
//! record to contain no unbound fields, so two holes in the same place
//! fail. Fields are examined in lexicographic order and the first
//! offending field is reported.

use std::collections::BTreeSet;

use thiserror::Error;

use super::value::{Record, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnifyOutcome {
    Success(Record),
    Fail(UnifyFail),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnifyFail {
    pub field: String,
    pub kind: UnifyFailKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnifyFailKind {
    /// Both sides bound to different values.
    Conflict,
    /// Neither side bound; the unified record would keep a hole.
    BothUnbound,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("records do not share a field set (left {left:?}, right {right:?})")]
pub struct SchemaMismatchError {
    pub left: Vec<String>,
    pub right: Vec<String>,
}

/// Unify one field pair.
pub(crate) fn unify_field(a: &Value, b: &Value) -> Result<Value, UnifyFailKind> {
    match (a.is_unbound(), b.is_unbound()) {
        (true, true) => Err(UnifyFailKind::BothUnbound),
        (true, false) => Ok(b.clone()),
        (false, true) => Ok(a.clone()),
        (false, false) => {
            if a == b {
                Ok(a.clone())
            } else {
                Err(UnifyFailKind::Conflict)
            }
        }
    }
}

pub fn unify_records(a: &Record, b: &Record) -> Result<UnifyOutcome, SchemaMismatchError> {
    let fields_a: BTreeSet<&String> = a.keys().collect();
    let fields_b: BTreeSet<&String> = b.keys().collect();
    if fields_a != fields_b {
        return Err(SchemaMismatchError {
            left: a.keys().cloned().collect(),
            right: b.keys().cloned().collect(),
        });
    }
    let mut unified = Record::new();
    for (name, va) in a {
        let vb = &b[name];
        match unify_field(va, vb) {
            Ok(v) => {
                unified.insert(name.clone(), v);
            }
            Err(kind) => {
                return Ok(UnifyOutcome::Fail(UnifyFail {
                    field: name.clone(),
                    kind,
                }))
            }
        }
    }
    Ok(UnifyOutcome::Success(unified))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::value::ActorAddress;

    fn rec(pairs: &[(&str, Value)]) -> Record {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }

    #[test]
    fn identical_fully_bound_records() {
        let a = rec(&[("x", Value::num("10")), ("y", Value::Str("p".into()))]);
        match unify_records(&a, &a).unwrap() {
            UnifyOutcome::Success(u) => assert_eq!(u, a),
            other => panic!("expected success, got {other:?}"),
        }
    }

    #[test]
    fn single_conflict_names_the_field() {
        let a = rec(&[("price", Value::num("10")), ("q", Value::num("5"))]);
        let b = rec(&[("price", Value::num("11")), ("q", Value::num("5"))]);
        match unify_records(&a, &b).unwrap() {
            UnifyOutcome::Fail(f) => {
                assert_eq!(f.field, "price");
                assert_eq!(f.kind, UnifyFailKind::Conflict);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn one_sided_holes_fill_in() {
        let a = rec(&[("x", Value::Unbound), ("y", Value::num("2"))]);
        let b = rec(&[("x", Value::Str("v".into())), ("y", Value::Unbound)]);
        match unify_records(&a, &b).unwrap() {
            UnifyOutcome::Success(u) => {
                assert_eq!(u["x"], Value::Str("v".into()));
                assert_eq!(u["y"], Value::num("2"));
            }
            other => panic!("expected success, got {other:?}"),
        }
    }

    #[test]
    fn shared_hole_fails() {
        let a = rec(&[("x", Value::Unbound)]);
        match unify_records(&a, &a).unwrap() {
            UnifyOutcome::Fail(f) => assert_eq!(f.kind, UnifyFailKind::BothUnbound),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn schema_mismatch() {
        let a = rec(&[("x", Value::Unbound)]);
        let b = rec(&[("y", Value::Unbound)]);
        assert!(unify_records(&a, &b).is_err());
    }

    #[test]
    fn exhaustive_against_brute_force_oracle() {
        // Every field of each side independently Unbound / v1 / v2,
        // for 3 fields: 9 per-field combinations, 729 record pairs.
        let choices = [Value::Unbound, Value::num("1"), Value::num("2")];
        let names = ["a", "b", "c"];
        let mut checked = 0usize;
        for combo in 0..9usize.pow(3) {
            let mut a = Record::new();
            let mut b = Record::new();
            let mut k = combo;
            for name in names {
                let pair = k % 9;
                k /= 9;
                a.insert(name.into(), choices[pair % 3].clone());
                b.insert(name.into(), choices[pair / 3].clone());
            }
            let got = unify_records(&a, &b).unwrap();
            assert_eq!(got, oracle(&a, &b), "a={a:?} b={b:?}");
            checked += 1;
        }
        assert_eq!(checked, 729);
    }

    /// Independent restatement of the unification rule, kept separate
    /// from the implementation on purpose.
    fn oracle(a: &Record, b: &Record) -> UnifyOutcome {
        for (name, va) in a {
            let vb = &b[name];
            if va.is_unbound() && vb.is_unbound() {
                return UnifyOutcome::Fail(UnifyFail {
                    field: name.clone(),
                    kind: UnifyFailKind::BothUnbound,
                });
            }
            if !va.is_unbound() && !vb.is_unbound() && va != vb {
                return UnifyOutcome::Fail(UnifyFail {
                    field: name.clone(),
                    kind: UnifyFailKind::Conflict,
                });
            }
        }
        let unified = a
            .iter()
            .map(|(k, v)| {
                let val = if v.is_unbound() {
                    b[k].clone()
                } else {
                    v.clone()
                };
                (k.clone(), val)
            })
            .collect();
        UnifyOutcome::Success(unified)
    }

    #[test]
    fn addresses_unify_by_exact_equality() {
        let a = rec(&[("who", Value::Address(ActorAddress::new("A")))]);
        let b = rec(&[("who", Value::Unbound)]);
        match unify_records(&a, &b).unwrap() {
            UnifyOutcome::Success(u) => {
                assert_eq!(u["who"], Value::Address(ActorAddress::new("A")))
            }
            other => panic!("{other:?}"),
        }
    }
}
