//! Shared helpers for the integration suites: corpus paths, scratch
//! files, and a seeded generator of random valid contract trees.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rand_core::{Rng, SeedableRng};

use hzl::lang::{
    Action, ActorDefinition, DataRef, FieldDecl, FieldInit, HandlerDecl, Literal, RecordDecl,
    StateDecl, StateTarget, Template, TemplateSegment, Trigger,
};
use hzl::span::{Name, Pos, Span};

pub fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("corpus")
        .join(name)
}

pub fn corpus_text(name: &str) -> String {
    std::fs::read_to_string(corpus(name)).unwrap()
}

/// Scratch file path unique to a test, cleaned up by the OS.
pub fn scratch(test: &str, name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hzl-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(format!("{test}-{name}"))
}

pub struct Generator {
    pub rng: ChaCha8Rng,
}

impl Generator {
    pub fn new(seed: u64) -> Self {
        Generator {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn pick(&mut self, bound: usize) -> usize {
        (self.rng.next_u64() % bound as u64) as usize
    }

    fn ident(&mut self, prefix: &str, ix: usize) -> String {
        let tails = ["", "x", "val", "item", "part"];
        format!("{prefix}{}{}", tails[self.pick(tails.len())], ix)
    }

    fn name(&mut self, prefix: &str, ix: usize) -> Name {
        Name::new(self.ident(prefix, ix), Pos::start())
    }

    fn literal(&mut self) -> FieldInit {
        match self.pick(3) {
            0 => FieldInit::Wildcard,
            1 => FieldInit::Literal(Literal::Str(format!("s{}", self.pick(100)))),
            _ => {
                let text = match self.pick(3) {
                    0 => format!("{}", self.pick(1000)),
                    1 => format!("-{}", self.pick(50) + 1),
                    _ => format!("{}.{}", self.pick(100), self.pick(98) + 1),
                };
                FieldInit::Literal(Literal::Num(text.parse().unwrap()))
            }
        }
    }

    /// A random structurally valid definition: unique names, resolvable
    /// references, at least one state, no empty handlers.
    pub fn actor(&mut self) -> ActorDefinition {
        let record_count = self.pick(4);
        let records: Vec<RecordDecl> = (0..record_count)
            .map(|r| {
                let fields = (0..self.pick(4) + 1)
                    .map(|f| FieldDecl {
                        name: self.name("f", f),
                        init: self.literal(),
                    })
                    .collect();
                RecordDecl {
                    name: self.name("rec", r),
                    fields,
                }
            })
            .collect();

        let state_count = self.pick(3) + 1;
        let state_names: Vec<Name> = (0..state_count).map(|s| self.name("St", s)).collect();

        let states = state_names
            .iter()
            .enumerate()
            .map(|(ix, name)| {
                let mut handlers = Vec::new();
                if self.pick(2) == 0 {
                    handlers.push(HandlerDecl {
                        trigger: Trigger::Enter(Name::synthetic("Enter")),
                        actions: self.actions(&records, &state_names, 2),
                    });
                }
                if self.pick(3) == 0 {
                    handlers.push(HandlerDecl {
                        trigger: Trigger::Exit(Name::synthetic("Exit")),
                        actions: self.actions(&records, &state_names, 2),
                    });
                }
                for m in 0..self.pick(3) {
                    handlers.push(HandlerDecl {
                        trigger: Trigger::Message(self.name("msg", m * 10 + ix)),
                        actions: self.actions(&records, &state_names, 3),
                    });
                }
                if handlers.is_empty() {
                    handlers.push(HandlerDecl {
                        trigger: Trigger::Enter(Name::synthetic("Enter")),
                        actions: vec![Action::NoOp],
                    });
                }
                StateDecl {
                    name: name.clone(),
                    handlers,
                }
            })
            .collect();

        ActorDefinition {
            records,
            states,
            source_span: Span::point(Pos::start()),
            origin: "<generated>".into(),
        }
    }

    fn actions(&mut self, records: &[RecordDecl], states: &[Name], depth: usize) -> Vec<Action> {
        let count = self.pick(3) + 1;
        (0..count)
            .map(|_| self.action(records, states, depth))
            .collect()
    }

    fn action(&mut self, records: &[RecordDecl], states: &[Name], depth: usize) -> Action {
        let with_records = !records.is_empty();
        loop {
            match self.pick(7) {
                0 => return Action::NoOp,
                1 => return Action::TerminateActor,
                2 => {
                    let target = if self.pick(4) == 0 {
                        StateTarget::SelfHold
                    } else {
                        StateTarget::State(states[self.pick(states.len())].clone())
                    };
                    return Action::TransitionTo(target);
                }
                3 if with_records => {
                    let rec = &records[self.pick(records.len())];
                    return Action::MapThis {
                        target: DataRef::root(rec.name.clone()),
                    };
                }
                4 if with_records && depth > 0 => {
                    let left = &records[self.pick(records.len())];
                    let right = &records[self.pick(records.len())];
                    let into = if self.pick(3) == 0 {
                        Some(DataRef::root(
                            records[self.pick(records.len())].name.clone(),
                        ))
                    } else {
                        None
                    };
                    let on_success = if self.pick(2) == 0 {
                        self.actions(records, states, depth - 1)
                    } else {
                        Vec::new()
                    };
                    let on_fail = if self.pick(2) == 0 {
                        self.actions(records, states, depth - 1)
                    } else {
                        Vec::new()
                    };
                    return Action::Match {
                        left: DataRef::root(left.name.clone()),
                        right: DataRef::root(right.name.clone()),
                        into,
                        on_success,
                        on_fail,
                    };
                }
                5 if with_records => {
                    let rec = &records[self.pick(records.len())];
                    let field = &rec.fields[self.pick(rec.fields.len())];
                    let address = DataRef {
                        record: rec.name.clone(),
                        field: Some(field.name.clone()),
                    };
                    return Action::Send {
                        address,
                        template: self.template(records),
                    };
                }
                _ => {
                    if self.pick(2) == 0 {
                        return Action::NoOp;
                    }
                }
            }
        }
    }

    /// Template text alphabet avoids the markers the lexer treats
    /// specially, and stays in the parser's normalized form so a
    /// pretty-printed tree re-parses to itself.
    fn template(&mut self, records: &[RecordDecl]) -> Template {
        let words = ["notice", "paid", "of", "unit", "at", "total:", "ref"];
        let mut segments = Vec::new();
        let parts = self.pick(3) + 1;
        for i in 0..parts {
            let mut text = String::new();
            if i > 0 {
                text.push(' ');
            }
            text.push_str(words[self.pick(words.len())]);
            if self.pick(2) == 0 {
                text.push(' ');
                text.push_str(words[self.pick(words.len())]);
            }
            let field_follows = !records.is_empty() && self.pick(2) == 0 && i + 1 < parts;
            if field_follows {
                text.push(' ');
                segments.push(TemplateSegment::Text(text));
                let rec = &records[self.pick(records.len())];
                let field = &rec.fields[self.pick(rec.fields.len())];
                segments.push(TemplateSegment::Field(DataRef {
                    record: rec.name.clone(),
                    field: Some(field.name.clone()),
                }));
            } else {
                segments.push(TemplateSegment::Text(text));
            }
        }
        // Merge adjacent text segments the way the parser would.
        let mut merged: Vec<TemplateSegment> = Vec::new();
        for seg in segments {
            match (&seg, merged.last_mut()) {
                (TemplateSegment::Text(t), Some(TemplateSegment::Text(prev))) => prev.push_str(t),
                _ => merged.push(seg),
            }
        }
        Template { segments: merged }
    }
}
