//! Syntax tree for one ACTOR source unit.
//!
//! Structural equality ignores positions and origins, so a parsed tree
//! compares equal to the re-parse of its pretty-printed form.

use crate::decimal::Decimal;
use crate::span::{Name, Span};

#[derive(Debug, Clone)]
pub struct ActorDefinition {
    pub records: Vec<RecordDecl>,
    pub states: Vec<StateDecl>,
    pub source_span: Span,
    /// Origin label of the source this tree was parsed from.
    pub origin: String,
}

impl ActorDefinition {
    /// Actor name used for qualified ontology bindings.
    pub fn actor_name(&self) -> String {
        super::lexer::SourceUnit::new("", self.origin.clone()).actor_name()
    }

    pub fn record(&self, name: &str) -> Option<&RecordDecl> {
        self.records.iter().find(|r| r.name.text == name)
    }

    /// Initial state: the first declared state.
    pub fn initial_state(&self) -> Option<&StateDecl> {
        self.states.first()
    }
}

impl PartialEq for ActorDefinition {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records && self.states == other.states
    }
}

impl Eq for ActorDefinition {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordDecl {
    pub name: Name,
    pub fields: Vec<FieldDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: Name,
    pub init: FieldInit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldInit {
    /// `{?}` — starts unbound.
    Wildcard,
    Literal(Literal),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Literal {
    Str(String),
    Num(Decimal),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateDecl {
    pub name: Name,
    pub handlers: Vec<HandlerDecl>,
}

impl StateDecl {
    pub fn enter(&self) -> Option<&HandlerDecl> {
        self.handlers
            .iter()
            .find(|h| matches!(h.trigger, Trigger::Enter(_)))
    }

    pub fn exit(&self) -> Option<&HandlerDecl> {
        self.handlers
            .iter()
            .find(|h| matches!(h.trigger, Trigger::Exit(_)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandlerDecl {
    pub trigger: Trigger,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Trigger {
    Enter(Name),
    Exit(Name),
    Message(Name),
}

impl Trigger {
    pub fn name(&self) -> &Name {
        match self {
            Trigger::Enter(n) | Trigger::Exit(n) | Trigger::Message(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    TransitionTo(StateTarget),
    /// `map { *THIS, @record }` — copy message payload fields into a record.
    MapThis {
        target: DataRef,
    },
    Match {
        left: DataRef,
        right: DataRef,
        /// Explicit unification target; defaults to a record named
        /// "contract" with matching fields when absent.
        into: Option<DataRef>,
        on_success: Vec<Action>,
        on_fail: Vec<Action>,
    },
    Send {
        address: DataRef,
        template: Template,
    },
    TerminateActor,
    /// `'do nothing'`
    NoOp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateTarget {
    State(Name),
    /// `_` — remain in the current state, running neither Exit nor Enter.
    SelfHold,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataRef {
    pub record: Name,
    pub field: Option<Name>,
}

impl DataRef {
    pub fn root(record: Name) -> Self {
        DataRef {
            record,
            field: None,
        }
    }
}

impl std::fmt::Display for DataRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.field {
            Some(field) => write!(f, "@{}.{}", self.record, field),
            None => write!(f, "@{}", self.record),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub segments: Vec<TemplateSegment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateSegment {
    Text(String),
    Field(DataRef),
}
