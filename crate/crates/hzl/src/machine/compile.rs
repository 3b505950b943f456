//! Compile a validated definition into an executable machine.
//!
//! All name resolution happens here: state references (case
//! insensitive), record and field references, match field alignments
//! and template message types. The result is deterministic: equal
//! definitions compile to equal machines.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::lang::{
    Action, ActorDefinition, DataRef, FieldInit, Literal, StateTarget, Template, TemplateSegment,
    Trigger,
};

use super::{
    template_message_type, CompiledMachine, CompiledSegment, CompiledTemplate, MatchPlan, Op,
    Program, RecordSchema, Target, Value,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("unresolved {what} '{name}'")]
    Unresolved { what: &'static str, name: String },
    #[error("an actor must declare at least one state")]
    NoStates,
}

pub fn compile(def: &ActorDefinition) -> Result<CompiledMachine, CompileError> {
    if def.states.is_empty() {
        return Err(CompileError::NoStates);
    }

    let records: Vec<RecordSchema> = def
        .records
        .iter()
        .map(|r| RecordSchema {
            name: r.name.text.clone(),
            fields: r.fields.iter().map(|f| f.name.text.clone()).collect(),
            initial: r
                .fields
                .iter()
                .map(|f| match &f.init {
                    FieldInit::Wildcard => Value::Unbound,
                    FieldInit::Literal(Literal::Str(s)) => Value::Str(s.clone()),
                    FieldInit::Literal(Literal::Num(d)) => Value::Num(d.clone()),
                })
                .collect(),
        })
        .collect();

    let states: Vec<String> = def.states.iter().map(|s| s.name.text.clone()).collect();

    let cc = Compiler {
        records: &records,
        states: &states,
    };

    let mut handlers = BTreeMap::new();
    let mut enter: Vec<Program> = vec![Vec::new(); states.len()];
    let mut exit: Vec<Program> = vec![Vec::new(); states.len()];

    for (state_ix, state) in def.states.iter().enumerate() {
        for handler in &state.handlers {
            let program = cc.compile_program(&handler.actions)?;
            match &handler.trigger {
                Trigger::Enter(_) => enter[state_ix] = program,
                Trigger::Exit(_) => exit[state_ix] = program,
                Trigger::Message(name) => {
                    handlers.insert((state_ix, name.text.clone()), program);
                }
            }
        }
    }

    Ok(CompiledMachine {
        states,
        initial_state: 0,
        records,
        handlers,
        enter,
        exit,
        interceptors: BTreeMap::new(),
    })
}

pub(crate) struct Compiler<'a> {
    records: &'a [RecordSchema],
    states: &'a [String],
}

impl<'a> Compiler<'a> {
    /// Compile a program against an existing machine; used by behavior
    /// fragment composition.
    pub(crate) fn for_machine(machine: &'a CompiledMachine) -> Self {
        Compiler {
            records: &machine.records,
            states: &machine.states,
        }
    }

    fn state_ix(&self, name: &str) -> Result<usize, CompileError> {
        let lower = name.to_lowercase();
        self.states
            .iter()
            .position(|s| s.to_lowercase() == lower)
            .ok_or(CompileError::Unresolved {
                what: "state",
                name: name.to_string(),
            })
    }

    fn record_ix(&self, name: &str) -> Result<usize, CompileError> {
        self.records
            .iter()
            .position(|r| r.name == name)
            .ok_or(CompileError::Unresolved {
                what: "record",
                name: name.to_string(),
            })
    }

    pub(crate) fn field_ref(&self, dref: &DataRef) -> Result<(usize, usize), CompileError> {
        let rec = self.record_ix(&dref.record.text)?;
        let field = dref.field.as_ref().ok_or(CompileError::Unresolved {
            what: "field reference",
            name: format!("{dref}"),
        })?;
        let ix = self.records[rec]
            .field_index(&field.text)
            .ok_or(CompileError::Unresolved {
                what: "field",
                name: format!("{dref}"),
            })?;
        Ok((rec, ix))
    }

    pub(crate) fn compile_program(&self, actions: &[Action]) -> Result<Program, CompileError> {
        actions.iter().map(|a| self.compile_action(a)).collect()
    }

    fn compile_action(&self, action: &Action) -> Result<Op, CompileError> {
        Ok(match action {
            Action::NoOp => Op::Nop,
            Action::TerminateActor => Op::Terminate,
            Action::TransitionTo(StateTarget::SelfHold) => Op::Transition(Target::Stay),
            Action::TransitionTo(StateTarget::State(name)) => {
                Op::Transition(Target::Goto(self.state_ix(&name.text)?))
            }
            Action::MapThis { target } => Op::MapPayload {
                rec: self.record_ix(&target.record.text)?,
            },
            Action::Match {
                left,
                right,
                into,
                on_success,
                on_fail,
            } => {
                let left_ix = self.record_ix(&left.record.text)?;
                let right_ix = self.record_ix(&right.record.text)?;
                let into_ix = match into {
                    Some(t) => Some(self.record_ix(&t.record.text)?),
                    None => None,
                };
                let plan = self.plan_match(left_ix, right_ix, into_ix);
                Op::Match {
                    plan,
                    on_success: self.compile_program(on_success)?,
                    on_fail: self.compile_program(on_fail)?,
                }
            }
            Action::Send { address, template } => {
                let rec = self.record_ix(&address.record.text)?;
                let field = match &address.field {
                    Some(f) => self.records[rec].field_index(&f.text).map(Some).ok_or(
                        CompileError::Unresolved {
                            what: "field",
                            name: format!("{address}"),
                        },
                    )?,
                    // A root reference is not a value; step fails with
                    // BadAddress if this send executes.
                    None => None,
                };
                Op::Send {
                    rec,
                    field,
                    template: self.compile_template(template)?,
                }
            }
        })
    }

    /// Align the match operands field-by-field. Misalignments are kept
    /// in the plan and fail the step only if the match executes.
    fn plan_match(&self, left: usize, right: usize, into_explicit: Option<usize>) -> MatchPlan {
        let lf: BTreeSet<&String> = self.records[left].fields.iter().collect();
        let rf: BTreeSet<&String> = self.records[right].fields.iter().collect();
        if lf != rf {
            return MatchPlan::Misaligned(format!(
                "{} vs {}",
                self.records[left].name, self.records[right].name
            ));
        }
        // Default unification target: a record named "contract" with
        // the same field set.
        let into_rec = match into_explicit {
            Some(ix) => Some(ix),
            None => self
                .records
                .iter()
                .position(|r| r.name == "contract")
                .filter(|&ix| {
                    let tf: BTreeSet<&String> = self.records[ix].fields.iter().collect();
                    tf == lf
                }),
        };
        if let Some(ix) = into_rec {
            let tf: BTreeSet<&String> = self.records[ix].fields.iter().collect();
            if tf != lf {
                return MatchPlan::Misaligned(format!(
                    "into {} does not share the field set",
                    self.records[ix].name
                ));
            }
        }
        let mut names: Vec<&String> = lf.into_iter().collect();
        names.sort();
        let pairs = names
            .into_iter()
            .map(|name| {
                let l = self.records[left].field_index(name).expect("aligned");
                let r = self.records[right].field_index(name).expect("aligned");
                let t = into_rec.map(|ix| self.records[ix].field_index(name).expect("aligned"));
                (name.clone(), l, r, t)
            })
            .collect();
        MatchPlan::Aligned {
            left,
            right,
            pairs,
            into_rec,
        }
    }

    pub(crate) fn compile_template(
        &self,
        template: &Template,
    ) -> Result<CompiledTemplate, CompileError> {
        let leading = template.segments.first().and_then(|s| match s {
            TemplateSegment::Text(t) => Some(t.as_str()),
            TemplateSegment::Field(_) => None,
        });
        let message_type = template_message_type(leading);
        let segments = template
            .segments
            .iter()
            .map(|seg| {
                Ok(match seg {
                    TemplateSegment::Text(t) => CompiledSegment::Text(t.clone()),
                    TemplateSegment::Field(dref) => {
                        let (rec, field) = self.field_ref(dref)?;
                        CompiledSegment::Field(rec, field)
                    }
                })
            })
            .collect::<Result<Vec<_>, CompileError>>()?;
        Ok(CompiledTemplate {
            message_type,
            segments,
        })
    }
}

impl CompiledMachine {
    /// Compile a standalone template against this machine's records.
    pub fn compile_standalone_template(
        &self,
        template: &Template,
    ) -> Result<CompiledTemplate, CompileError> {
        Compiler::for_machine(self).compile_template(template)
    }
}
