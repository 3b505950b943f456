//! The declarative ACTOR contract language: lexer, parser, validator
//! and canonical pretty-printer for `.hzl` sources.
//!
//! A contract declares its data records and a state model; every state
//! names the message types it accepts and the effects of each receipt.
//!
//! # Grammar
//!
//! ```text
//! actor    := "ACTOR" "{" data model "}"
//! data     := "DATA" "{" record* "}"
//! record   := IDENT "{" field ("," field)* "}"
//! field    := IDENT "{" ("?" | literal) "}"
//! model    := "MODEL" "{" state ("," state)* "}"
//! state    := IDENT "{" handler ("," handler)* "}"
//! handler  := "#" IDENT "{" action ("," action)* "}"
//! action    := "transitionTo" ("{" target "}" | "=>" target)
//!            | "map" "{" "*THIS" "," recordref "}"
//!            | "match" "{" recordref "," recordref ("," "into" recordref)?
//!                      ("," "@SUCCEEDS" branch)? ("," "@FAILS" branch)? "}"
//!            | "send" "{" dataref "," "compose" ">>>" template "<<<" "}"
//!            | "terminateActor"
//!            | QUOTED                     // 'do nothing'
//! target    := "$" IDENT | "_"
//! branch    := "{" action ("," action)* "}" | action
//! recordref := "@" IDENT
//! fieldref  := "@" IDENT "." IDENT
//! dataref   := recordref | fieldref
//! template  := (TEXT | fieldref | "-->")*
//! literal   := STRING | NUMBER
//! ```
//!
//! `//` comments run to end of line. Commas are accepted leniently as
//! optional separators; the pretty printer always emits the canonical
//! form above. Inside a `compose` body, `-->` continuations and
//! whitespace runs collapse to single spaces and the outer edges are
//! trimmed. `#Enter` and `#Exit` are lifecycle handlers; every other
//! `#name` accepts messages of that type. `transitionTo => _` holds
//! the current state without running Exit or Enter effects.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod token;
pub mod validate;

pub use ast::{
    Action, ActorDefinition, DataRef, FieldDecl, FieldInit, HandlerDecl, Literal, RecordDecl,
    StateDecl, StateTarget, Template, TemplateSegment, Trigger,
};
pub use lexer::{tokenize, LexError, LexErrorKind, SourceUnit};
pub use parser::{parse, parse_source, LangError, ParseError};
pub use pretty::pretty_print;
pub use token::{Token, TokenKind};
pub use validate::validate;

/// Parse and validate a source unit in one call, folding syntax errors
/// into positioned diagnostics.
pub fn check_source(src: &SourceUnit) -> Result<ActorDefinition, Vec<crate::diag::Diagnostic>> {
    match parse_source(src) {
        Ok(def) => {
            let diags = validate(&def);
            if diags.is_empty() {
                Ok(def)
            } else {
                Err(diags)
            }
        }
        Err(LangError::Lex(e)) => Err(vec![crate::diag::Diagnostic::new(
            &src.origin,
            e.pos,
            "lex-error",
            e.kind.to_string(),
        )]),
        Err(LangError::Parse(e)) => {
            let msg = match &e {
                ParseError::Unexpected {
                    expected, found, ..
                } => {
                    format!("expected {}, found {found}", expected.join(" or "))
                }
                ParseError::UnknownAction { keyword, .. } => {
                    format!("unknown action '{keyword}'")
                }
            };
            Err(vec![crate::diag::Diagnostic::new(
                &src.origin,
                e.pos(),
                "parse-error",
                msg,
            )])
        }
    }
}
