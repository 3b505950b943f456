//! Machine-checkable protocol semantics.
//!
//! [`extract_protocol`] lifts a compiled machine to a labeled
//! transition system: one LTS state per machine state, one label per
//! observable outcome of a message receipt. A label is the consumed
//! message type, the set of message types emitted on that execution
//! path (statically scanned through the handler, Exit and Enter
//! programs, with match success and fail branches contributing
//! separate labels), and whether the path terminates the actor.
//! Enter-chained transitions collapse into the triggering label, and a
//! path that would fail at runtime (chain bound, misaligned match)
//! shows as a stay-with-no-effects label, mirroring the all-or-nothing
//! step. Payload values are deliberately abstracted away: protocol
//! equivalence is about shapes, not data.
//!
//! [`check_equivalence`] decides strong bisimilarity by partition
//! refinement; [`check_conformance`] decides the simulation preorder
//! (every labeled path of the implementation is a path of the
//! specification, from the bootstrap rest states). Both produce a
//! distinguishing label path when they fail, when one exists.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::machine::{CompiledMachine, MatchPlan, Op, Program, Target};

/// Desk-scale bound on comparable signatures.
pub const STATE_BOUND: usize = 256;

/// Maximum chained Enter-triggered transitions, as in the step semantics.
const MAX_ENTER_CHAIN: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub consumed: String,
    pub emitted: BTreeSet<String>,
    pub terminates: bool,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let emitted: Vec<&str> = self.emitted.iter().map(|s| s.as_str()).collect();
        write!(
            f,
            "{}/{{{}}}{}",
            self.consumed,
            emitted.join(","),
            if self.terminates { "!" } else { "" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolSignature {
    pub state_names: Vec<String>,
    /// Bootstrap rest states: where the machine settles after spawn.
    pub initials: BTreeSet<usize>,
    pub transitions: BTreeMap<(usize, Label), BTreeSet<usize>>,
}

impl ProtocolSignature {
    pub fn state_count(&self) -> usize {
        self.state_names.len()
    }

    pub fn labels(&self) -> BTreeSet<Label> {
        self.transitions.keys().map(|(_, l)| l.clone()).collect()
    }

    pub fn successors(&self, state: usize, label: &Label) -> BTreeSet<usize> {
        self.transitions
            .get(&(state, label.clone()))
            .cloned()
            .unwrap_or_default()
    }

    pub fn successors_of_set(&self, states: &BTreeSet<usize>, label: &Label) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for &s in states {
            out.extend(self.successors(s, label));
        }
        out
    }

    /// Rewrite message-type names through ontology term bindings; used
    /// by the strict comparison mode. Unbound names stay as they are.
    pub fn rebind(&self, bindings: &BTreeMap<String, String>) -> ProtocolSignature {
        let map = |name: &str| -> String {
            bindings
                .get(name)
                .map(|t| format!("term:{t}"))
                .unwrap_or_else(|| name.to_string())
        };
        let transitions = self
            .transitions
            .iter()
            .map(|((s, label), targets)| {
                let new_label = Label {
                    consumed: map(&label.consumed),
                    emitted: label.emitted.iter().map(|e| map(e)).collect(),
                    terminates: label.terminates,
                };
                ((*s, new_label), targets.clone())
            })
            .collect();
        ProtocolSignature {
            state_names: self.state_names.clone(),
            initials: self.initials.clone(),
            transitions,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AnalyzerError {
    #[error("signature has {states} states, beyond the desk-scale bound of {bound}")]
    TooLarge { states: usize, bound: usize },
}

// ---------------------------------------------------------------------------
// Static protocol extraction

#[derive(Debug, Clone)]
struct SBranch {
    pending: Option<Target>,
    emitted: BTreeSet<String>,
    terminated: bool,
    /// Set when this path would fail the whole step at runtime.
    failed: bool,
}

impl SBranch {
    fn fresh() -> Self {
        SBranch {
            pending: None,
            emitted: BTreeSet::new(),
            terminated: false,
            failed: false,
        }
    }
}

type Outcome = (usize, BTreeSet<String>, bool);

fn exec_static(program: &Program, branches: Vec<SBranch>, in_exit: bool) -> Vec<SBranch> {
    let mut cur = branches;
    for op in program {
        match op {
            Op::Nop | Op::MapPayload { .. } => {}
            Op::Terminate => cur.iter_mut().for_each(|b| b.terminated = true),
            Op::Transition(t) => {
                if !in_exit {
                    cur.iter_mut().for_each(|b| b.pending = Some(*t));
                }
            }
            Op::Send { template, .. } => {
                for b in &mut cur {
                    b.emitted.insert(template.message_type.clone());
                }
            }
            Op::Match {
                plan,
                on_success,
                on_fail,
            } => {
                let mut next = Vec::new();
                for b in cur {
                    if b.failed {
                        next.push(b);
                        continue;
                    }
                    match plan {
                        MatchPlan::Misaligned(_) => {
                            let mut fb = b;
                            fb.failed = true;
                            next.push(fb);
                        }
                        MatchPlan::Aligned { .. } => {
                            next.extend(exec_static(on_success, vec![b.clone()], in_exit));
                            next.extend(exec_static(on_fail, vec![b], in_exit));
                        }
                    }
                }
                cur = next;
            }
        }
    }
    cur
}

/// Resolve a branch's pending transition through Exit/Enter programs,
/// following Enter-triggered chains up to the runtime bound.
fn resolve_chain(
    m: &CompiledMachine,
    orig: usize,
    current: usize,
    mut branch: SBranch,
    chained: usize,
) -> Vec<Outcome> {
    if branch.failed {
        return vec![(orig, BTreeSet::new(), false)];
    }
    let target = match branch.pending.take() {
        None | Some(Target::Stay) => {
            return vec![(current, branch.emitted, branch.terminated)];
        }
        Some(Target::Goto(next)) => next,
    };
    if chained > MAX_ENTER_CHAIN {
        return vec![(orig, BTreeSet::new(), false)];
    }
    let mut out = Vec::new();
    for exit_branch in exec_static(&m.exit_program(current), vec![branch], true) {
        if exit_branch.failed {
            out.push((orig, BTreeSet::new(), false));
            continue;
        }
        for mut enter_branch in exec_static(&m.enter_program(target), vec![exit_branch], false) {
            match enter_branch.pending {
                Some(Target::Goto(_)) => {
                    out.extend(resolve_chain(m, orig, target, enter_branch, chained + 1));
                }
                _ => {
                    enter_branch.pending = None;
                    if enter_branch.failed {
                        out.push((orig, BTreeSet::new(), false));
                    } else {
                        out.push((target, enter_branch.emitted, enter_branch.terminated));
                    }
                }
            }
        }
    }
    out
}

fn program_outcomes(m: &CompiledMachine, state: usize, program: &Program) -> BTreeSet<Outcome> {
    exec_static(program, vec![SBranch::fresh()], false)
        .into_iter()
        .flat_map(|b| resolve_chain(m, state, state, b, 0))
        .collect()
}

pub fn extract_protocol(m: &CompiledMachine) -> ProtocolSignature {
    let mut transitions: BTreeMap<(usize, Label), BTreeSet<usize>> = BTreeMap::new();
    for (state, message_type) in m.handler_domain() {
        let program = m.effective_program(state, &message_type);
        for (target, emitted, terminates) in program_outcomes(m, state, &program) {
            let label = Label {
                consumed: message_type.clone(),
                emitted,
                terminates,
            };
            transitions
                .entry((state, label))
                .or_default()
                .insert(target);
        }
        // Composed guards may veto the receipt: an extra no-effect outcome.
        if m.has_guards(state, &message_type) {
            let label = Label {
                consumed: message_type.clone(),
                emitted: BTreeSet::new(),
                terminates: false,
            };
            transitions.entry((state, label)).or_default().insert(state);
        }
    }

    // Bootstrap rest states: where the initial Enter chain settles.
    let initials: BTreeSet<usize> = exec_static(
        &m.enter_program(m.initial_state),
        vec![SBranch::fresh()],
        false,
    )
    .into_iter()
    .flat_map(|b| resolve_chain(m, m.initial_state, m.initial_state, b, 0))
    .map(|(target, _, _)| target)
    .collect();

    ProtocolSignature {
        state_names: m.states.clone(),
        initials,
        transitions,
    }
}

// ---------------------------------------------------------------------------
// Equivalence: strong bisimulation by partition refinement

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceVerdict {
    pub equivalent: bool,
    /// Distinguishing label path, when one exists.
    pub witness: Option<Vec<Label>>,
}

fn check_bound(sig: &ProtocolSignature) -> Result<(), AnalyzerError> {
    if sig.state_count() > STATE_BOUND {
        return Err(AnalyzerError::TooLarge {
            states: sig.state_count(),
            bound: STATE_BOUND,
        });
    }
    Ok(())
}

/// Strong bisimilarity of the two signatures' bootstrap rest states.
pub fn check_equivalence(
    a: &ProtocolSignature,
    b: &ProtocolSignature,
) -> Result<EquivalenceVerdict, AnalyzerError> {
    check_bound(a)?;
    check_bound(b)?;

    let na = a.state_count();
    let total = na + b.state_count();

    // Disjoint-union transition table.
    let mut transitions: BTreeMap<(usize, Label), BTreeSet<usize>> = BTreeMap::new();
    for ((s, l), ts) in &a.transitions {
        transitions.insert((*s, l.clone()), ts.clone());
    }
    for ((s, l), ts) in &b.transitions {
        transitions.insert((s + na, l.clone()), ts.iter().map(|t| t + na).collect());
    }
    let mut outgoing: Vec<Vec<(&Label, &BTreeSet<usize>)>> = vec![Vec::new(); total];
    for ((s, l), ts) in &transitions {
        outgoing[*s].push((l, ts));
    }

    // A state's one-step signature: its current block plus the set of
    // (label, target block) pairs it can move along.
    type RefineKey<'k> = (usize, BTreeSet<(&'k Label, usize)>);

    // Partition refinement: split blocks by one-step signatures until
    // stable.
    let mut block = vec![0usize; total];
    loop {
        let mut keys: Vec<RefineKey<'_>> = Vec::with_capacity(total);
        for state in 0..total {
            let mut sig: BTreeSet<(&Label, usize)> = BTreeSet::new();
            for (label, targets) in &outgoing[state] {
                for t in targets.iter() {
                    sig.insert((label, block[*t]));
                }
            }
            keys.push((block[state], sig));
        }
        let mut ids: BTreeMap<&RefineKey<'_>, usize> = BTreeMap::new();
        let mut next = vec![0usize; total];
        for (state, key) in keys.iter().enumerate() {
            let fresh = ids.len();
            let id = *ids.entry(key).or_insert(fresh);
            next[state] = id;
        }
        if next == block {
            break;
        }
        block = next;
    }

    let blocks_a: BTreeSet<usize> = a.initials.iter().map(|&s| block[s]).collect();
    let blocks_b: BTreeSet<usize> = b.initials.iter().map(|&s| block[s + na]).collect();
    let equivalent = blocks_a == blocks_b;
    let witness = if equivalent {
        None
    } else {
        trace_witness(a, b)
    };
    Ok(EquivalenceVerdict {
        equivalent,
        witness,
    })
}

/// Shortest label path on which exactly one side gets stuck, found by
/// breadth-first search over subset pairs. Replaying the returned path
/// drives one signature into a dead end while the other proceeds.
fn trace_witness(a: &ProtocolSignature, b: &ProtocolSignature) -> Option<Vec<Label>> {
    let mut alphabet = a.labels();
    alphabet.extend(b.labels());

    let start = (a.initials.clone(), b.initials.clone());
    let mut seen = BTreeSet::new();
    seen.insert(start.clone());
    let mut queue = VecDeque::new();
    queue.push_back((start, Vec::new()));

    while let Some(((sa, sb), path)) = queue.pop_front() {
        if seen.len() > 100_000 {
            return None;
        }
        for label in &alphabet {
            let next_a = a.successors_of_set(&sa, label);
            let next_b = b.successors_of_set(&sb, label);
            match (next_a.is_empty(), next_b.is_empty()) {
                (true, true) => {}
                (false, true) | (true, false) => {
                    let mut w = path.clone();
                    w.push(label.clone());
                    return Some(w);
                }
                (false, false) => {
                    let key = (next_a.clone(), next_b.clone());
                    if seen.insert(key) {
                        let mut w = path.clone();
                        w.push(label.clone());
                        queue.push_back(((next_a, next_b), w));
                    }
                }
            }
        }
    }
    None
}

/// Simulation preorder: every labeled path of `imp` (from its rest
/// states) is a path of `spec`. Unreachable states never constrain the
/// verdict.
pub fn check_conformance(
    imp: &ProtocolSignature,
    spec: &ProtocolSignature,
) -> Result<EquivalenceVerdict, AnalyzerError> {
    check_bound(imp)?;
    check_bound(spec)?;

    let ni = imp.state_count();
    let ns = spec.state_count();
    let mut sim = vec![vec![true; ns]; ni];
    let imp_labels = imp.labels();

    loop {
        let mut changed = false;
        for i in 0..ni {
            for s in 0..ns {
                if !sim[i][s] {
                    continue;
                }
                let ok = imp_labels.iter().all(|label| {
                    let itargets = imp.successors(i, label);
                    if itargets.is_empty() {
                        return true;
                    }
                    let stargets = spec.successors(s, label);
                    itargets
                        .iter()
                        .all(|&it| stargets.iter().any(|&st| sim[it][st]))
                });
                if !ok {
                    sim[i][s] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let conforms = imp
        .initials
        .iter()
        .all(|&i| spec.initials.iter().any(|&s| sim[i][s]));
    let witness = if conforms {
        None
    } else {
        conformance_witness(imp, spec)
    };
    Ok(EquivalenceVerdict {
        equivalent: conforms,
        witness,
    })
}

/// Shortest impl path the spec cannot follow.
fn conformance_witness(imp: &ProtocolSignature, spec: &ProtocolSignature) -> Option<Vec<Label>> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    let start = (imp.initials.clone(), spec.initials.clone());
    seen.insert(start.clone());
    queue.push_back((start, Vec::new()));
    let alphabet = imp.labels();

    while let Some(((ia, sa), path)) = queue.pop_front() {
        if seen.len() > 100_000 {
            return None;
        }
        for label in &alphabet {
            let next_i = imp.successors_of_set(&ia, label);
            if next_i.is_empty() {
                continue;
            }
            let next_s = spec.successors_of_set(&sa, label);
            let mut w = path.clone();
            w.push(label.clone());
            if next_s.is_empty() {
                return Some(w);
            }
            let key = (next_i.clone(), next_s.clone());
            if seen.insert(key) {
                queue.push_back(((next_i, next_s), w));
            }
        }
    }
    None
}

impl CompiledMachine {
    /// The program a receipt actually runs: before-effects, the base
    /// handler, then after-effects in reverse order.
    pub(crate) fn effective_program(&self, state: usize, message_type: &str) -> Program {
        let base = self
            .handlers
            .get(&(state, message_type.to_string()))
            .cloned()
            .unwrap_or_default();
        let Some(set) = self.interceptors.get(&(state, message_type.to_string())) else {
            return base;
        };
        let mut program = Vec::new();
        for (_, p) in &set.befores {
            program.extend(p.iter().cloned());
        }
        program.extend(base);
        for (_, p) in set.afters.iter().rev() {
            program.extend(p.iter().cloned());
        }
        program
    }

    pub(crate) fn has_guards(&self, state: usize, message_type: &str) -> bool {
        self.interceptors
            .get(&(state, message_type.to_string()))
            .map(|set| !set.guards.is_empty())
            .unwrap_or(false)
    }

    pub(crate) fn enter_program(&self, state: usize) -> Program {
        self.enter[state].clone()
    }

    pub(crate) fn exit_program(&self, state: usize) -> Program {
        self.exit[state].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::tests::load_corpus;

    fn sig(name: &str) -> ProtocolSignature {
        extract_protocol(&load_corpus(name))
    }

    fn label(consumed: &str, emitted: &[&str], terminates: bool) -> Label {
        Label {
            consumed: consumed.into(),
            emitted: emitted.iter().map(|s| s.to_string()).collect(),
            terminates,
        }
    }

    #[test]
    fn buysell_protocol_shape() {
        let m = load_corpus("buysell.hzl");
        let s = extract_protocol(&m);
        let open = m.state_index("Open").unwrap();
        let closed = m.state_index("Closed").unwrap();

        assert_eq!(s.state_names, vec!["Initially", "Open", "Closed"]);
        assert_eq!(s.initials, BTreeSet::from([open]));

        let fail_buy = label("buyoffermsg", &[], false);
        let match_buy = label("buyoffermsg", &["ContractAdvice", "ContractNotice"], true);
        assert_eq!(s.successors(open, &fail_buy), BTreeSet::from([open]));
        assert_eq!(s.successors(open, &match_buy), BTreeSet::from([closed]));

        let fail_sell = label("selloffermsg", &[], false);
        let match_sell = label("selloffermsg", &["ContractAdvice", "ContractNotice"], true);
        assert_eq!(s.successors(open, &fail_sell), BTreeSet::from([open]));
        assert_eq!(s.successors(open, &match_sell), BTreeSet::from([closed]));

        // Exactly these four transitions exist.
        assert_eq!(s.transitions.len(), 4);
    }

    #[test]
    fn single_state_machine_has_no_labels() {
        let s = sig("minimal.hzl");
        assert_eq!(s.state_count(), 1);
        assert!(s.transitions.is_empty());
    }

    #[test]
    fn extraction_is_deterministic() {
        assert_eq!(sig("buysell.hzl"), sig("buysell.hzl"));
    }

    #[test]
    fn every_signature_is_self_equivalent() {
        for name in ["buysell.hzl", "party.hzl", "escrow.hzl", "minimal.hzl"] {
            let s = sig(name);
            let v = check_equivalence(&s, &s).unwrap();
            assert!(v.equivalent, "{name}");
        }
    }

    #[test]
    fn renamed_and_reordered_copy_is_equivalent() {
        let v = check_equivalence(&sig("buysell.hzl"), &sig("buysell-renamed.hzl")).unwrap();
        assert!(v.equivalent);
    }

    #[test]
    fn fails_to_closed_mutant_is_not_equivalent() {
        let v = check_equivalence(&sig("buysell.hzl"), &sig("buysell-mutant.hzl")).unwrap();
        assert!(!v.equivalent);
        let witness = v.witness.expect("a trace witness exists");
        assert_eq!(
            witness.len(),
            1,
            "one non-matching offer distinguishes them: {witness:?}"
        );
        assert!(witness[0].emitted.is_empty());
        assert!(!witness[0].terminates);
    }

    #[test]
    fn witness_replay_diverges() {
        let a = sig("buysell.hzl");
        let b = sig("buysell-mutant.hzl");
        let witness = check_equivalence(&a, &b).unwrap().witness.unwrap();
        let mut sa = a.initials.clone();
        let mut sb = b.initials.clone();
        for label in &witness {
            sa = a.successors_of_set(&sa, label);
            sb = b.successors_of_set(&sb, label);
        }
        assert!(sa.is_empty() != sb.is_empty());
    }

    #[test]
    fn different_protocols_are_not_equivalent() {
        let v = check_equivalence(&sig("buysell.hzl"), &sig("escrow.hzl")).unwrap();
        assert!(!v.equivalent);
        assert!(v.witness.is_some());
    }

    #[test]
    fn conformance_is_reflexive() {
        for name in ["buysell.hzl", "escrow.hzl", "party.hzl"] {
            let s = sig(name);
            assert!(check_conformance(&s, &s).unwrap().equivalent, "{name}");
        }
    }

    #[test]
    fn unreachable_extra_state_still_conforms() {
        let v = check_conformance(&sig("buysell-extra.hzl"), &sig("buysell.hzl")).unwrap();
        assert!(
            v.equivalent,
            "diagnostic-only unreachable state must not matter"
        );
    }

    #[test]
    fn extra_emission_does_not_conform_and_names_the_label() {
        let v = check_conformance(&sig("buysell-extrasend.hzl"), &sig("buysell.hzl")).unwrap();
        assert!(!v.equivalent);
        let witness = v.witness.expect("has witness");
        let last = witness.last().unwrap();
        assert!(last.emitted.contains("AuditCopy"), "witness label: {last}");
    }

    #[test]
    fn equivalence_implies_two_way_conformance() {
        let a = sig("buysell.hzl");
        let b = sig("buysell-renamed.hzl");
        assert!(check_equivalence(&a, &b).unwrap().equivalent);
        assert!(check_conformance(&a, &b).unwrap().equivalent);
        assert!(check_conformance(&b, &a).unwrap().equivalent);
    }

    #[test]
    fn too_large_signatures_are_refused() {
        let mut big = sig("minimal.hzl");
        big.state_names = (0..300).map(|i| format!("S{i}")).collect();
        assert!(matches!(
            check_equivalence(&big, &big),
            Err(AnalyzerError::TooLarge { .. })
        ));
    }

    #[test]
    fn composed_guards_add_a_veto_outcome() {
        use crate::lang::SourceUnit;
        use crate::machine::{compose_behaviors, parse_fragments};

        let base = load_corpus("buysell.hzl");
        let frags = parse_fragments(&SourceUnit::new(
            "BEHAVIOR cap { guard Open:#buyoffermsg { require { *THIS.quantity <= 100 } } }",
            "cap.bhv",
        ))
        .unwrap();
        let composed = compose_behaviors(&base, &frags).unwrap();
        let plain = extract_protocol(&base);
        let guarded = extract_protocol(&composed);
        // The guard can only veto, and a vetoed receipt already looks
        // like the fail branch (stay, no emissions), so the protocol
        // shape is unchanged here.
        assert!(check_equivalence(&plain, &guarded).unwrap().equivalent);
        let open = base.state_index("Open").unwrap();
        let veto = label("buyoffermsg", &[], false);
        assert_eq!(guarded.successors(open, &veto), BTreeSet::from([open]));
    }

    #[test]
    fn strict_rebinding_distinguishes_differently_bound_protocols() {
        let a = sig("buysell.hzl");
        let mut bind_a = BTreeMap::new();
        bind_a.insert("buyoffermsg".to_string(), "trade:msg#buyoffer".to_string());
        let mut bind_b = BTreeMap::new();
        bind_b.insert("buyoffermsg".to_string(), "trade:msg#cancel".to_string());
        let ra = a.rebind(&bind_a);
        let rb = a.rebind(&bind_b);
        assert!(!check_equivalence(&ra, &rb).unwrap().equivalent);
        assert!(
            check_equivalence(&ra, &a.rebind(&bind_a))
                .unwrap()
                .equivalent
        );
    }
}
