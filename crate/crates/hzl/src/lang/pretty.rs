//! Canonical pretty-printer: two-space indentation, grammar-form
//! separators, one spelling per construct. `parse(pretty_print(d))`
//! is structurally equal to `d`.

use super::ast::*;
use super::lexer::SourceUnit;

pub fn pretty_print(def: &ActorDefinition) -> SourceUnit {
    let mut p = Printer {
        out: String::new(),
        indent: 0,
    };
    p.actor(def);
    SourceUnit::new(p.out, "<pretty>")
}

struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn open(&mut self, text: &str) {
        self.line(text);
        self.indent += 1;
    }

    fn close(&mut self, text: &str) {
        self.indent -= 1;
        self.line(text);
    }

    fn actor(&mut self, def: &ActorDefinition) {
        self.open("ACTOR {");
        self.open("DATA {");
        for rec in &def.records {
            self.record(rec);
        }
        self.close("}");
        self.open("MODEL {");
        for (i, state) in def.states.iter().enumerate() {
            let last = i + 1 == def.states.len();
            self.state(state, last);
        }
        self.close("}");
        self.close("}");
    }

    fn record(&mut self, rec: &RecordDecl) {
        self.open(&format!("{} {{", rec.name));
        for (i, f) in rec.fields.iter().enumerate() {
            let sep = if i + 1 == rec.fields.len() { "" } else { "," };
            self.line(&format!("{} {{{}}}{}", f.name, init_text(&f.init), sep));
        }
        self.close("}");
    }

    fn state(&mut self, state: &StateDecl, last: bool) {
        self.open(&format!("{} {{", state.name));
        for (i, h) in state.handlers.iter().enumerate() {
            let hlast = i + 1 == state.handlers.len();
            self.handler(h, hlast);
        }
        self.close(if last { "}" } else { "}," });
    }

    fn handler(&mut self, h: &HandlerDecl, last: bool) {
        self.open(&format!("#{} {{", h.trigger.name()));
        self.actions(&h.actions);
        self.close(if last { "}" } else { "}," });
    }

    fn actions(&mut self, actions: &[Action]) {
        for (i, a) in actions.iter().enumerate() {
            let last = i + 1 == actions.len();
            self.action(a, last);
        }
    }

    fn action(&mut self, action: &Action, last: bool) {
        let sep = if last { "" } else { "," };
        match action {
            Action::NoOp => self.line(&format!("'do nothing'{sep}")),
            Action::TerminateActor => self.line(&format!("terminateActor{sep}")),
            Action::TransitionTo(StateTarget::State(name)) => {
                self.line(&format!("transitionTo {{ ${name} }}{sep}"))
            }
            Action::TransitionTo(StateTarget::SelfHold) => {
                self.line(&format!("transitionTo {{ _ }}{sep}"))
            }
            Action::MapThis { target } => self.line(&format!("map {{ *THIS, {target} }}{sep}")),
            Action::Match {
                left,
                right,
                into,
                on_success,
                on_fail,
            } => {
                let mut head = format!("match {{ {left}, {right}");
                if let Some(t) = into {
                    head.push_str(&format!(", into {t}"));
                }
                let tail_fail = !on_fail.is_empty();
                let tail_success = !on_success.is_empty();
                if !tail_success && !tail_fail {
                    self.line(&format!("{head} }}{sep}"));
                    return;
                }
                head.push(',');
                self.open(&head);
                if tail_success {
                    self.open("@SUCCEEDS {");
                    self.actions(on_success);
                    self.close(if tail_fail { "}," } else { "}" });
                }
                if tail_fail {
                    self.open("@FAILS {");
                    self.actions(on_fail);
                    self.close("}");
                }
                self.close(&format!("}}{sep}"));
            }
            Action::Send { address, template } => {
                self.open(&format!("send {{ {address},"));
                self.line(&format!("compose >>>{}<<<", template_text(template)));
                self.close(&format!("}}{sep}"));
            }
        }
    }
}

fn init_text(init: &FieldInit) -> String {
    match init {
        FieldInit::Wildcard => "?".to_string(),
        FieldInit::Literal(Literal::Str(s)) => {
            format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
        }
        FieldInit::Literal(Literal::Num(d)) => d.to_string(),
    }
}

fn template_text(t: &Template) -> String {
    let mut s = String::from(" ");
    for seg in &t.segments {
        match seg {
            TemplateSegment::Text(text) => s.push_str(text),
            TemplateSegment::Field(dref) => s.push_str(&dref.to_string()),
        }
    }
    s.push(' ');
    s
}
