//! Static checks over a parsed [`ActorDefinition`].
//!
//! All findings come back as positioned diagnostics; nothing is thrown.
//! State references resolve case-insensitively ($OPEN matches state
//! Open); record and field references are case-sensitive.

use std::collections::{BTreeMap, BTreeSet};

use crate::diag::Diagnostic;

use super::ast::*;

pub mod codes {
    pub const NO_STATES: &str = "no-states";
    pub const DUPLICATE_RECORD: &str = "duplicate-record";
    pub const DUPLICATE_FIELD: &str = "duplicate-field";
    pub const DUPLICATE_STATE: &str = "duplicate-state";
    pub const DUPLICATE_HANDLER: &str = "duplicate-handler";
    pub const UNRESOLVED_STATE: &str = "unresolved-state";
    pub const UNRESOLVED_RECORD: &str = "unresolved-record";
    pub const UNRESOLVED_FIELD: &str = "unresolved-field";
    pub const EMPTY_HANDLER: &str = "empty-handler";
}

pub fn validate(def: &ActorDefinition) -> Vec<Diagnostic> {
    let mut v = Validator {
        def,
        file: def.origin.clone(),
        records: BTreeMap::new(),
        states: BTreeMap::new(),
        out: Vec::new(),
    };
    v.run();
    v.out
}

struct Validator<'a> {
    def: &'a ActorDefinition,
    file: String,
    /// record name -> field set
    records: BTreeMap<String, BTreeSet<String>>,
    /// lowercased state name -> declared name
    states: BTreeMap<String, String>,
    out: Vec<Diagnostic>,
}

impl<'a> Validator<'a> {
    fn diag(&mut self, name: &crate::span::Name, code: &str, message: String) {
        self.out
            .push(Diagnostic::new(&self.file, name.pos, code, message));
    }

    fn run(&mut self) {
        if self.def.states.is_empty() {
            self.out.push(Diagnostic::new(
                &self.file,
                self.def.source_span.start,
                codes::NO_STATES,
                "an actor must declare at least one state".to_string(),
            ));
        }

        for rec in &self.def.records {
            if self.records.contains_key(&rec.name.text) {
                self.diag(
                    &rec.name,
                    codes::DUPLICATE_RECORD,
                    format!("record '{}' is declared more than once", rec.name),
                );
            }
            let mut fields = BTreeSet::new();
            for f in &rec.fields {
                if !fields.insert(f.name.text.clone()) {
                    self.diag(
                        &f.name,
                        codes::DUPLICATE_FIELD,
                        format!(
                            "field '{}' is declared more than once in '{}'",
                            f.name, rec.name
                        ),
                    );
                }
            }
            self.records.entry(rec.name.text.clone()).or_insert(fields);
        }

        for state in &self.def.states {
            let key = state.name.text.to_lowercase();
            let duplicate = self.states.insert(key, state.name.text.clone()).is_some();
            if duplicate {
                self.diag(
                    &state.name,
                    codes::DUPLICATE_STATE,
                    format!(
                        "state '{}' is declared more than once (case-insensitive)",
                        state.name
                    ),
                );
            }
        }

        for state in &self.def.states {
            let mut seen = BTreeSet::new();
            for h in &state.handlers {
                let key = match &h.trigger {
                    Trigger::Enter(_) => "#Enter".to_string(),
                    Trigger::Exit(_) => "#Exit".to_string(),
                    Trigger::Message(n) => format!("msg:{}", n.text),
                };
                if !seen.insert(key) {
                    self.diag(
                        h.trigger.name(),
                        codes::DUPLICATE_HANDLER,
                        format!(
                            "state '{}' has more than one '#{}' handler",
                            state.name,
                            h.trigger.name()
                        ),
                    );
                }
                if h.actions.is_empty() {
                    self.diag(
                        h.trigger.name(),
                        codes::EMPTY_HANDLER,
                        format!(
                            "handler '#{}' has no actions; use 'do nothing'",
                            h.trigger.name()
                        ),
                    );
                }
                self.check_actions(&h.actions);
            }
        }
    }

    fn check_actions(&mut self, actions: &[Action]) {
        for action in actions {
            match action {
                Action::TransitionTo(StateTarget::State(name)) => {
                    if !self.states.contains_key(&name.text.to_lowercase()) {
                        self.diag(
                            &name.clone(),
                            codes::UNRESOLVED_STATE,
                            format!("state reference '${name}' does not resolve"),
                        );
                    }
                }
                Action::TransitionTo(StateTarget::SelfHold) => {}
                Action::MapThis { target } => self.check_data_ref(target),
                Action::Match {
                    left,
                    right,
                    into,
                    on_success,
                    on_fail,
                } => {
                    self.check_data_ref(left);
                    self.check_data_ref(right);
                    if let Some(t) = into {
                        self.check_data_ref(t);
                    }
                    self.check_actions(on_success);
                    self.check_actions(on_fail);
                }
                Action::Send { address, template } => {
                    self.check_data_ref(address);
                    for seg in &template.segments {
                        if let TemplateSegment::Field(dref) = seg {
                            self.check_data_ref(dref);
                        }
                    }
                }
                Action::TerminateActor | Action::NoOp => {}
            }
        }
    }

    fn check_data_ref(&mut self, dref: &DataRef) {
        let Some(fields) = self.records.get(&dref.record.text) else {
            let name = dref.record.clone();
            self.diag(
                &name,
                codes::UNRESOLVED_RECORD,
                format!("data reference '{dref}' names no declared record"),
            );
            return;
        };
        if let Some(field) = &dref.field {
            if !fields.contains(&field.text) {
                let name = field.clone();
                let rec = dref.record.text.clone();
                self.diag(
                    &name,
                    codes::UNRESOLVED_FIELD,
                    format!("record '{rec}' has no field '{field}'"),
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::lexer::SourceUnit;
    use crate::lang::parser::parse_source;

    fn diags(text: &str) -> Vec<Diagnostic> {
        validate(&parse_source(&SourceUnit::new(text, "<test>")).unwrap())
    }

    #[test]
    fn state_refs_resolve_case_insensitively() {
        let out = diags(
            "ACTOR { DATA { } MODEL { Initially { #Enter { transitionTo { $OPEN } } }, \
             Open { #Enter { 'x' } } } }",
        );
        assert!(out.is_empty(), "{out:?}");
    }

    #[test]
    fn dangling_state_ref() {
        let out = diags("ACTOR { DATA { } MODEL { A { #Enter { transitionTo { $Missing } } } } }");
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].code, codes::UNRESOLVED_STATE);
        assert!(out[0].message.contains("Missing"));
        assert!(out[0].line >= 1 && out[0].col >= 1);
    }

    #[test]
    fn duplicate_enter_handler() {
        let out = diags("ACTOR { DATA { } MODEL { A { #Enter { 'x' }, #Enter { 'y' } } } }");
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].code, codes::DUPLICATE_HANDLER);
    }

    #[test]
    fn unresolved_record_and_field() {
        let out = diags(
            "ACTOR { DATA { r { a {?} } } MODEL { S { #m { map { *THIS, @ghost }, \
             send { @r.b, compose >>> Note: @r.a <<< } } } } }",
        );
        let codes: Vec<&str> = out.iter().map(|d| d.code.as_str()).collect();
        assert!(codes.contains(&codes::UNRESOLVED_RECORD));
        assert!(codes.contains(&codes::UNRESOLVED_FIELD));
    }

    #[test]
    fn duplicate_state_names_case_insensitive() {
        let out =
            diags("ACTOR { DATA { } MODEL { Open { #Enter { 'x' } }, OPEN { #Enter { 'x' } } } }");
        assert_eq!(out[0].code, codes::DUPLICATE_STATE);
    }

    #[test]
    fn duplicate_record_and_field_names() {
        let out = diags(
            "ACTOR { DATA { r { a {?}, a {?} }, r { b {?} } } MODEL { S { #Enter { 'x' } } } }",
        );
        let codes: Vec<&str> = out.iter().map(|d| d.code.as_str()).collect();
        assert!(codes.contains(&codes::DUPLICATE_FIELD));
        assert!(codes.contains(&codes::DUPLICATE_RECORD));
    }
}
