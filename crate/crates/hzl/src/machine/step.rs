//! Single-step execution: one envelope in, one all-or-nothing result out.

use super::unify::{unify_field, UnifyFailKind};
use super::{
    ActorAddress, CompiledMachine, CompiledSegment, CompiledTemplate, DataStore, Envelope,
    FailReason, GuardValue, MatchPlan, Op, Program, Record, RejectReason, StepStatus, Target,
    TransitionResult, Value,
};

/// Maximum chained Enter-triggered transitions in one step.
const MAX_ENTER_CHAIN: usize = 8;

/// Process one message receipt.
///
/// With no handler for (state, message type) the receipt is Rejected;
/// on any effect error it is Failed; either way the returned state and
/// store equal the inputs and the outbox is empty.
pub fn step(
    m: &CompiledMachine,
    state: usize,
    store: &DataStore,
    msg: &Envelope,
) -> TransitionResult {
    let key = (state, msg.message_type.clone());
    let Some(program) = m.handlers.get(&key) else {
        return unchanged(state, store, StepStatus::Rejected(RejectReason::NoHandler));
    };

    let mut exec = Exec {
        m,
        store: store.clone(),
        outbox: Vec::new(),
        pending: None,
        terminated: false,
        payload: &msg.payload,
        self_addr: &msg.to,
        in_exit: false,
    };

    let outcome = (|| -> Result<usize, FailReason> {
        if let Some(set) = m.interceptors.get(&key) {
            for (frag, checks) in &set.guards {
                for check in checks {
                    let lhs = exec.guard_value(&check.lhs);
                    let rhs = exec.guard_value(&check.rhs);
                    if !CompiledMachine::guard_holds(check.op, lhs.as_ref(), rhs.as_ref()) {
                        return Err(FailReason::PolicyVeto(frag.clone()));
                    }
                }
            }
            for (_, before) in &set.befores {
                exec.run(before)?;
            }
            exec.run(program)?;
            for (_, after) in set.afters.iter().rev() {
                exec.run(after)?;
            }
        } else {
            exec.run(program)?;
        }
        exec.resolve_transition(state)
    })();

    match outcome {
        Ok(next_state) => TransitionResult {
            next_state,
            new_store: exec.store,
            outbox: exec.outbox,
            terminated: exec.terminated,
            status: StepStatus::Completed,
        },
        Err(reason) => unchanged(state, store, StepStatus::Failed(reason)),
    }
}

/// Run the initial state's Enter program, as a synthetic bootstrap
/// receipt does at spawn time. The actor comes to rest wherever the
/// Enter chain leads.
pub fn bootstrap(m: &CompiledMachine, self_addr: &ActorAddress) -> TransitionResult {
    bootstrap_with_store(m, self_addr, m.initial_store())
}

/// Bootstrap from a caller-initialized store.
pub fn bootstrap_with_store(
    m: &CompiledMachine,
    self_addr: &ActorAddress,
    store: DataStore,
) -> TransitionResult {
    let payload = Record::new();
    let mut exec = Exec {
        m,
        store: store.clone(),
        outbox: Vec::new(),
        pending: None,
        terminated: false,
        payload: &payload,
        self_addr,
        in_exit: false,
    };

    let outcome = (|| -> Result<usize, FailReason> {
        exec.run(&m.enter[m.initial_state])?;
        exec.resolve_transition(m.initial_state)
    })();

    match outcome {
        Ok(next_state) => TransitionResult {
            next_state,
            new_store: exec.store,
            outbox: exec.outbox,
            terminated: exec.terminated,
            status: StepStatus::Completed,
        },
        Err(reason) => unchanged(m.initial_state, &store, StepStatus::Failed(reason)),
    }
}

fn unchanged(state: usize, store: &DataStore, status: StepStatus) -> TransitionResult {
    TransitionResult {
        next_state: state,
        new_store: store.clone(),
        outbox: Vec::new(),
        terminated: false,
        status,
    }
}

struct Exec<'a> {
    m: &'a CompiledMachine,
    store: DataStore,
    outbox: Vec<Envelope>,
    pending: Option<Target>,
    terminated: bool,
    payload: &'a Record,
    self_addr: &'a ActorAddress,
    in_exit: bool,
}

impl<'a> Exec<'a> {
    fn run(&mut self, program: &Program) -> Result<(), FailReason> {
        for op in program {
            self.op(op)?;
        }
        Ok(())
    }

    fn op(&mut self, op: &Op) -> Result<(), FailReason> {
        match op {
            Op::Nop => {}
            Op::Terminate => self.terminated = true,
            Op::Transition(target) => {
                // Exit programs run while a transition is in flight;
                // their own transition requests carry no meaning.
                if !self.in_exit {
                    self.pending = Some(*target);
                }
            }
            Op::MapPayload { rec } => {
                let m = self.m;
                let schema = &m.records[*rec];
                for (name, value) in self.payload {
                    let Some(ix) = schema.field_index(name) else {
                        return Err(FailReason::UnknownField(name.clone()));
                    };
                    self.store.records[*rec][ix] = value.clone();
                }
            }
            Op::Match {
                plan,
                on_success,
                on_fail,
            } => match plan {
                MatchPlan::Misaligned(what) => {
                    return Err(FailReason::SchemaMismatch(what.clone()))
                }
                MatchPlan::Aligned {
                    left,
                    right,
                    pairs,
                    into_rec,
                } => {
                    // A match waits for both operands to be complete
                    // offers; holes route to the fail branch.
                    let complete = self.store.records[*left].iter().all(|v| !v.is_unbound())
                        && self.store.records[*right].iter().all(|v| !v.is_unbound());
                    let unified = if complete {
                        self.unify_pairs(*left, *right, pairs)
                    } else {
                        None
                    };
                    match unified {
                        Some(values) => {
                            if let Some(target) = into_rec {
                                for (ix, v) in values {
                                    self.store.records[*target][ix] = v;
                                }
                            }
                            self.run(on_success)?;
                        }
                        None => self.run(on_fail)?,
                    }
                }
            },
            Op::Send {
                rec,
                field,
                template,
            } => {
                let addr = field
                    .and_then(|ix| match &self.store.records[*rec][ix] {
                        Value::Address(a) => Some(a.clone()),
                        _ => None,
                    })
                    .ok_or_else(|| {
                        FailReason::BadAddress(format!(
                            "@{}{}",
                            self.m.records[*rec].name,
                            field
                                .map(|ix| format!(".{}", self.m.records[*rec].fields[ix]))
                                .unwrap_or_default()
                        ))
                    })?;
                let text = self.m.render_template(&self.store, template)?;
                let mut payload = Record::new();
                payload.insert("text".to_string(), Value::Str(text));
                self.outbox.push(Envelope {
                    to: addr,
                    message_type: template.message_type.clone(),
                    payload,
                    seq: None,
                    sender: self.self_addr.clone(),
                });
            }
        }
        Ok(())
    }

    fn unify_pairs(
        &self,
        left: usize,
        right: usize,
        pairs: &[(String, usize, usize, Option<usize>)],
    ) -> Option<Vec<(usize, Value)>> {
        let mut values = Vec::with_capacity(pairs.len());
        for (_, l, r, t) in pairs {
            match unify_field(
                &self.store.records[left][*l],
                &self.store.records[right][*r],
            ) {
                Ok(v) => {
                    if let Some(t) = t {
                        values.push((*t, v));
                    }
                }
                Err(UnifyFailKind::Conflict | UnifyFailKind::BothUnbound) => return None,
            }
        }
        Some(values)
    }

    fn guard_value(&self, v: &GuardValue) -> Option<Value> {
        match v {
            GuardValue::Store(rec, field) => Some(self.store.records[*rec][*field].clone()),
            GuardValue::Payload(name) => self.payload.get(name).cloned(),
            GuardValue::Lit(value) => Some(value.clone()),
        }
    }

    /// Resolve the pending transition: Exit(old), switch, Enter(new),
    /// following Enter-triggered chains up to the bound.
    fn resolve_transition(&mut self, state: usize) -> Result<usize, FailReason> {
        let mut current = state;
        let mut target = match self.pending.take() {
            None | Some(Target::Stay) => return Ok(current),
            Some(Target::Goto(next)) => next,
        };
        let mut chained = 0usize;
        let m = self.m;
        loop {
            self.in_exit = true;
            let result = self.run(&m.exit[current]);
            self.in_exit = false;
            result?;

            current = target;
            self.pending = None;
            self.run(&m.enter[current])?;

            match self.pending.take() {
                None | Some(Target::Stay) => return Ok(current),
                Some(Target::Goto(next)) => {
                    chained += 1;
                    if chained > MAX_ENTER_CHAIN {
                        return Err(FailReason::TransitionLoop);
                    }
                    target = next;
                }
            }
        }
    }
}

impl CompiledMachine {
    /// Render a compiled template against a store. Field references
    /// must be bound; numbers render in canonical decimal form.
    pub fn render_template(
        &self,
        store: &DataStore,
        template: &CompiledTemplate,
    ) -> Result<String, FailReason> {
        let mut out = String::new();
        for seg in &template.segments {
            match seg {
                CompiledSegment::Text(t) => out.push_str(t),
                CompiledSegment::Field(rec, field) => match store.records[*rec][*field].render() {
                    Some(s) => out.push_str(&s),
                    None => {
                        return Err(FailReason::UnboundFieldInTemplate(format!(
                            "@{}.{}",
                            self.records[*rec].name, self.records[*rec].fields[*field]
                        )))
                    }
                },
            }
        }
        Ok(out)
    }
}
