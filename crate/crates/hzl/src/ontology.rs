//! Ontology terms and name bindings.
//!
//! A term registry (`.terms` file) gives formal, machine-checkable
//! meanings; an annotation set (`.ann` file) binds a contract's
//! qualified names to registry terms. Annotations never influence
//! execution — they exist so that every record, field, message type
//! and state can be identified by an ontology term, and so strict mode
//! can insist that they all are.
//!
//! Registry file: one term per line, `id | label | kind`, where kind is
//! `Concept`, `Property`, `MessageKind` or `StateKind` and id is an
//! IRI-like `scheme:path#fragment`. Annotation file: one binding per
//! line, `qualifiedName -> termId`. Qualified names take the forms
//! `actor/record`, `actor/record.field`, `actor/#message` and
//! `actor/$state`. `//` comments and blank lines are ignored in both.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::diag::Diagnostic;
use crate::lang::{ActorDefinition, Trigger};
use crate::span::Pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TermKind {
    Concept,
    Property,
    MessageKind,
    StateKind,
}

impl TermKind {
    pub fn parse(s: &str) -> Option<TermKind> {
        match s {
            "Concept" => Some(TermKind::Concept),
            "Property" => Some(TermKind::Property),
            "MessageKind" => Some(TermKind::MessageKind),
            "StateKind" => Some(TermKind::StateKind),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TermKind::Concept => "Concept",
            TermKind::Property => "Property",
            TermKind::MessageKind => "MessageKind",
            TermKind::StateKind => "StateKind",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OntologyTerm {
    pub id: String,
    pub label: String,
    pub kind: TermKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    terms: BTreeMap<String, OntologyTerm>,
}

impl Registry {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&OntologyTerm> {
        self.terms.get(id)
    }

    pub fn terms(&self) -> impl Iterator<Item = &OntologyTerm> {
        self.terms.values()
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("{origin}:{line}: duplicate term id '{id}'")]
    DuplicateTermId {
        origin: String,
        line: u32,
        id: String,
    },
    #[error("{origin}:{line}: malformed IRI '{id}' (expected scheme:path[#fragment])")]
    MalformedIri {
        origin: String,
        line: u32,
        id: String,
    },
    #[error("{origin}:{line}: malformed registry line (expected 'id | label | kind')")]
    MalformedLine { origin: String, line: u32 },
    #[error("{origin}:{line}: unknown term kind '{kind}'")]
    UnknownKind {
        origin: String,
        line: u32,
        kind: String,
    },
}

/// Check the IRI-like shape `scheme:path[#fragment]`.
fn iri_ok(id: &str) -> bool {
    let Some((scheme, rest)) = id.split_once(':') else {
        return false;
    };
    if scheme.is_empty()
        || !scheme
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic())
        || !scheme
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "+.-".contains(c))
    {
        return false;
    }
    let path = match rest.split_once('#') {
        Some((p, frag)) => {
            if frag.is_empty() {
                return false;
            }
            p
        }
        None => rest,
    };
    !path.is_empty()
}

pub fn load_registry(text: &str, origin: &str) -> Result<Registry, RegistryError> {
    let mut terms = BTreeMap::new();
    for (ix, raw) in text.lines().enumerate() {
        let line_no = ix as u32 + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        let parts: Vec<&str> = line.split('|').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(RegistryError::MalformedLine {
                origin: origin.into(),
                line: line_no,
            });
        }
        let (id, label, kind_text) = (parts[0], parts[1], parts[2]);
        if !iri_ok(id) {
            return Err(RegistryError::MalformedIri {
                origin: origin.into(),
                line: line_no,
                id: id.into(),
            });
        }
        let kind = TermKind::parse(kind_text).ok_or_else(|| RegistryError::UnknownKind {
            origin: origin.into(),
            line: line_no,
            kind: kind_text.into(),
        })?;
        let term = OntologyTerm {
            id: id.to_string(),
            label: label.to_string(),
            kind,
        };
        if terms.insert(term.id.clone(), term).is_some() {
            return Err(RegistryError::DuplicateTermId {
                origin: origin.into(),
                line: line_no,
                id: id.into(),
            });
        }
    }
    Ok(Registry { terms })
}

/// Bindings from qualified contract names to term ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationSet {
    pub bindings: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AnnotationError {
    #[error("{origin}:{line}: malformed binding (expected 'qualifiedName -> termId')")]
    MalformedLine { origin: String, line: u32 },
    #[error("{origin}:{line}: duplicate binding for '{name}'")]
    DuplicateBinding {
        origin: String,
        line: u32,
        name: String,
    },
    #[error("binding '{name}' refers to unknown term '{term}'")]
    UnknownTermId { name: String, term: String },
    #[error("binding '{name}' targets a name absent from the definition")]
    UnknownQualifiedName { name: String },
}

pub fn load_annotations(text: &str, origin: &str) -> Result<AnnotationSet, AnnotationError> {
    let mut bindings = BTreeMap::new();
    for (ix, raw) in text.lines().enumerate() {
        let line_no = ix as u32 + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        let Some((name, term)) = line.split_once("->") else {
            return Err(AnnotationError::MalformedLine {
                origin: origin.into(),
                line: line_no,
            });
        };
        let (name, term) = (name.trim().to_string(), term.trim().to_string());
        if name.is_empty() || term.is_empty() {
            return Err(AnnotationError::MalformedLine {
                origin: origin.into(),
                line: line_no,
            });
        }
        if bindings.insert(name.clone(), term).is_some() {
            return Err(AnnotationError::DuplicateBinding {
                origin: origin.into(),
                line: line_no,
                name,
            });
        }
    }
    Ok(AnnotationSet { bindings })
}

/// What a qualified name refers to, with the kind its term must have.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NameKind {
    Record,
    Field,
    Message,
    State,
}

impl NameKind {
    pub fn required_term_kind(&self) -> TermKind {
        match self {
            NameKind::Record => TermKind::Concept,
            NameKind::Field => TermKind::Property,
            NameKind::Message => TermKind::MessageKind,
            NameKind::State => TermKind::StateKind,
        }
    }
}

/// Every annotatable qualified name of a definition, with source position.
pub fn qualified_names(def: &ActorDefinition) -> Vec<(String, NameKind, Pos)> {
    let actor = def.actor_name();
    let mut out = Vec::new();
    for rec in &def.records {
        out.push((
            format!("{actor}/{}", rec.name),
            NameKind::Record,
            rec.name.pos,
        ));
        for field in &rec.fields {
            out.push((
                format!("{actor}/{}.{}", rec.name, field.name),
                NameKind::Field,
                field.name.pos,
            ));
        }
    }
    let mut seen_msgs = BTreeMap::new();
    for state in &def.states {
        out.push((
            format!("{actor}/${}", state.name),
            NameKind::State,
            state.name.pos,
        ));
        for h in &state.handlers {
            if let Trigger::Message(name) = &h.trigger {
                seen_msgs.entry(name.text.clone()).or_insert(name.pos);
            }
        }
    }
    for (msg, pos) in seen_msgs {
        out.push((format!("{actor}/#{msg}"), NameKind::Message, pos));
    }
    out
}

/// A definition paired with its resolved term bindings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedDefinition {
    pub actor: String,
    /// qualified name -> (name kind, bound term).
    pub bound: BTreeMap<String, (NameKind, OntologyTerm)>,
    /// Annotatable names with no binding, with positions for diagnostics.
    pub unbound: Vec<(String, NameKind, Pos)>,
    pub origin: String,
}

/// Attach an annotation set to a definition. Every binding must name
/// an existing term and an existing qualified name; names without a
/// binding are listed as unbound.
pub fn annotate(
    def: &ActorDefinition,
    ann: &AnnotationSet,
    registry: &Registry,
) -> Result<AnnotatedDefinition, AnnotationError> {
    let names = qualified_names(def);
    let index: BTreeMap<&str, NameKind> = names.iter().map(|(n, k, _)| (n.as_str(), *k)).collect();

    let mut bound = BTreeMap::new();
    for (name, term_id) in &ann.bindings {
        let Some(kind) = index.get(name.as_str()) else {
            return Err(AnnotationError::UnknownQualifiedName { name: name.clone() });
        };
        let Some(term) = registry.get(term_id) else {
            return Err(AnnotationError::UnknownTermId {
                name: name.clone(),
                term: term_id.clone(),
            });
        };
        bound.insert(name.clone(), (*kind, term.clone()));
    }

    let unbound = names
        .into_iter()
        .filter(|(n, _, _)| !bound.contains_key(n))
        .collect();

    Ok(AnnotatedDefinition {
        actor: def.actor_name(),
        bound,
        unbound,
        origin: def.origin.clone(),
    })
}

pub mod codes {
    pub const UNBOUND: &str = "unbound-name";
    pub const KIND_MISMATCH: &str = "term-kind-mismatch";
}

/// Strict mode: every field, message type and state must be bound to a
/// term of the matching kind (field to Property, message to
/// MessageKind, state to StateKind); records, when bound, must be
/// Concepts. An empty result means the contract is fully semantically
/// specified.
pub fn check_strict(adef: &AnnotatedDefinition) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (name, kind, pos) in &adef.unbound {
        if matches!(kind, NameKind::Record) {
            continue;
        }
        out.push(Diagnostic::new(
            &adef.origin,
            *pos,
            codes::UNBOUND,
            format!("'{name}' has no ontology binding"),
        ));
    }
    for (name, (kind, term)) in &adef.bound {
        let required = kind.required_term_kind();
        if term.kind != required {
            out.push(Diagnostic::new(
                &adef.origin,
                Pos::start(),
                codes::KIND_MISMATCH,
                format!(
                    "'{name}' is bound to {} term '{}' but needs a {} term",
                    term.kind.as_str(),
                    term.id,
                    required.as_str()
                ),
            ));
        }
    }
    out
}
