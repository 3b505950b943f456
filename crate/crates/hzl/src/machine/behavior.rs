//! Reusable behavior fragments: policy components composed onto a base
//! contract, such as country-specific rules.
//!
//! A `.bhv` file holds one or more named fragments:
//!
//! ```text
//! BEHAVIOR countrycap {
//!   guard Open:#buyoffermsg {
//!     require { *THIS.quantity <= 100 }
//!   }
//!   before *:* { ... actions ... }
//!   after Open:* { ... actions ... }
//! }
//! ```
//!
//! A selector is `statePattern ':' messagePattern`; either side may be
//! `*`. Selectors resolve against the base machine's handler table, so
//! an interceptor applies to every (state, message) handler it matches.
//! Guard bodies are `require { operand cmp operand }` clauses that can
//! only inspect the store (`@record.field`) and the message payload
//! (`*THIS.field`) and veto the receipt; they cannot mutate or send.
//! `before`/`after` bodies use the ordinary handler action syntax.
//!
//! Composition keeps fragments in list order: guards run first in
//! fragment order, then before effects in order, the base handler, and
//! after effects in reverse order. Composing `[f, g]` equals composing
//! `[f]` then `[g]`.

use thiserror::Error;

use crate::decimal::Decimal;
use crate::lang::parser::{parse_action_block, Parser};
use crate::lang::{tokenize, Action, DataRef, LangError, ParseError, SourceUnit, TokenKind};
use crate::span::Name;

use super::compile::{CompileError, Compiler};
use super::{CmpOp, CompiledMachine, GuardCheck, GuardValue, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorFragment {
    pub name: String,
    pub interceptors: Vec<Interceptor>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interceptor {
    pub phase: Phase,
    pub state_pattern: Pattern,
    pub message_pattern: Pattern,
    pub body: InterceptorBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Guard,
    Before,
    After,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Exact(String),
    Any,
}

impl Pattern {
    fn matches(&self, name: &str, case_insensitive: bool) -> bool {
        match self {
            Pattern::Any => true,
            Pattern::Exact(p) if case_insensitive => p.to_lowercase() == name.to_lowercase(),
            Pattern::Exact(p) => p == name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InterceptorBody {
    Guard(Vec<GuardClause>),
    Actions(Vec<Action>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardClause {
    pub lhs: GuardOperand,
    pub op: CmpOp,
    pub rhs: GuardOperand,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuardOperand {
    /// `@record.field`
    Store(DataRef),
    /// `*THIS.field`
    Payload(String),
    Str(String),
    Num(Decimal),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ComposeError {
    #[error("state pattern '{0}' matches no state of the base machine")]
    UnresolvedPattern(String),
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// Parse every fragment in a `.bhv` source.
pub fn parse_fragments(src: &SourceUnit) -> Result<Vec<BehaviorFragment>, LangError> {
    let tokens = tokenize(src)?;
    let mut p = Parser::new(&tokens, &src.origin);
    let mut fragments = Vec::new();
    while p.peek().is_some() {
        fragments.push(parse_fragment(&mut p)?);
    }
    if fragments.is_empty() {
        return Err(LangError::Parse(p.unexpected(&["'BEHAVIOR'"])));
    }
    Ok(fragments)
}

fn parse_fragment(p: &mut Parser<'_>) -> Result<BehaviorFragment, ParseError> {
    p.expect_keyword("BEHAVIOR")?;
    let name = p.take_name("fragment name")?;
    p.expect_lbrace()?;
    let mut interceptors = Vec::new();
    while !p.at(&TokenKind::RBrace) {
        interceptors.push(parse_interceptor(p)?);
        p.eat_comma();
    }
    p.expect_rbrace()?;
    Ok(BehaviorFragment {
        name: name.text,
        interceptors,
    })
}

fn parse_interceptor(p: &mut Parser<'_>) -> Result<Interceptor, ParseError> {
    let phase = if p.at_ident("guard") {
        Phase::Guard
    } else if p.at_ident("before") {
        Phase::Before
    } else if p.at_ident("after") {
        Phase::After
    } else {
        return Err(p.unexpected(&["'guard'", "'before'", "'after'"]));
    };
    p.bump();

    let state_pattern = parse_state_pattern(p)?;
    if !p.at(&TokenKind::Colon) {
        return Err(p.unexpected(&["':'"]));
    }
    p.bump();
    let message_pattern = parse_message_pattern(p)?;

    let body = match phase {
        Phase::Guard => InterceptorBody::Guard(parse_guard_body(p)?),
        Phase::Before | Phase::After => InterceptorBody::Actions(parse_action_block(p)?),
    };
    Ok(Interceptor {
        phase,
        state_pattern,
        message_pattern,
        body,
    })
}

fn parse_state_pattern(p: &mut Parser<'_>) -> Result<Pattern, ParseError> {
    match p.peek() {
        Some(TokenKind::Star) => {
            p.bump();
            Ok(Pattern::Any)
        }
        Some(TokenKind::Ident(w)) => {
            let pat = Pattern::Exact(w.clone());
            p.bump();
            Ok(pat)
        }
        _ => Err(p.unexpected(&["state name", "'*'"])),
    }
}

fn parse_message_pattern(p: &mut Parser<'_>) -> Result<Pattern, ParseError> {
    match p.peek() {
        Some(TokenKind::Star) => {
            p.bump();
            Ok(Pattern::Any)
        }
        Some(TokenKind::Handler(w)) => {
            let pat = Pattern::Exact(w.clone());
            p.bump();
            Ok(pat)
        }
        _ => Err(p.unexpected(&["message '#name'", "'*'"])),
    }
}

fn parse_guard_body(p: &mut Parser<'_>) -> Result<Vec<GuardClause>, ParseError> {
    p.expect_lbrace()?;
    let mut clauses = Vec::new();
    while !p.at(&TokenKind::RBrace) {
        p.expect_keyword("require")?;
        p.expect_lbrace()?;
        let lhs = parse_guard_operand(p)?;
        let op = parse_cmp_op(p)?;
        let rhs = parse_guard_operand(p)?;
        p.expect_rbrace()?;
        clauses.push(GuardClause { lhs, op, rhs });
        p.eat_comma();
    }
    p.expect_rbrace()?;
    if clauses.is_empty() {
        return Err(p.unexpected(&["'require'"]));
    }
    Ok(clauses)
}

fn parse_guard_operand(p: &mut Parser<'_>) -> Result<GuardOperand, ParseError> {
    match p.peek() {
        Some(TokenKind::StarRef(root, Some(field))) if root == "THIS" => {
            let op = GuardOperand::Payload(field.clone());
            p.bump();
            Ok(op)
        }
        Some(TokenKind::DataRef(root, Some(field))) => {
            let pos = p.pos();
            let op = GuardOperand::Store(DataRef {
                record: Name::new(root.clone(), pos),
                field: Some(Name::new(field.clone(), pos)),
            });
            p.bump();
            Ok(op)
        }
        Some(TokenKind::Str(s)) => {
            let op = GuardOperand::Str(s.clone());
            p.bump();
            Ok(op)
        }
        Some(TokenKind::Num(n)) => {
            let dec: Decimal = n.parse().map_err(|_| p.unexpected(&["number"]))?;
            p.bump();
            Ok(GuardOperand::Num(dec))
        }
        _ => Err(p.unexpected(&[
            "'*THIS.field'",
            "'@record.field'",
            "string literal",
            "number",
        ])),
    }
}

fn parse_cmp_op(p: &mut Parser<'_>) -> Result<CmpOp, ParseError> {
    let op = match p.peek() {
        Some(TokenKind::Eq) => CmpOp::Eq,
        Some(TokenKind::Neq) => CmpOp::Ne,
        Some(TokenKind::Lt) => CmpOp::Lt,
        Some(TokenKind::Le) => CmpOp::Le,
        Some(TokenKind::Gt) => CmpOp::Gt,
        Some(TokenKind::Ge) => CmpOp::Ge,
        _ => return Err(p.unexpected(&["comparison operator"])),
    };
    p.bump();
    Ok(op)
}

/// Compose fragments onto a base machine, in order. The base machine
/// is not modified; interceptors accumulate, so composing `fs1` then
/// `fs2` equals composing `fs1 ++ fs2` in one call.
pub fn compose_behaviors(
    base: &CompiledMachine,
    fragments: &[BehaviorFragment],
) -> Result<CompiledMachine, ComposeError> {
    let mut machine = base.clone();
    for fragment in fragments {
        for interceptor in &fragment.interceptors {
            apply_interceptor(&mut machine, &fragment.name, interceptor)?;
        }
    }
    Ok(machine)
}

fn apply_interceptor(
    machine: &mut CompiledMachine,
    fragment: &str,
    interceptor: &Interceptor,
) -> Result<(), ComposeError> {
    // Exact state patterns must name a real state, like $refs do.
    if let Pattern::Exact(name) = &interceptor.state_pattern {
        if machine.state_index(name).is_none() {
            return Err(ComposeError::UnresolvedPattern(name.clone()));
        }
    }

    let compiled_body = match &interceptor.body {
        InterceptorBody::Guard(clauses) => {
            let checks = clauses
                .iter()
                .map(|c| {
                    Ok(GuardCheck {
                        lhs: compile_operand(machine, &c.lhs)?,
                        op: c.op,
                        rhs: compile_operand(machine, &c.rhs)?,
                    })
                })
                .collect::<Result<Vec<_>, CompileError>>()?;
            CompiledBody::Guard(checks)
        }
        InterceptorBody::Actions(actions) => {
            let program = Compiler::for_machine(machine).compile_program(actions)?;
            CompiledBody::Program(program)
        }
    };

    let targets: Vec<(usize, String)> = machine
        .handlers
        .keys()
        .filter(|(state_ix, msg)| {
            interceptor
                .state_pattern
                .matches(&machine.states[*state_ix], true)
                && interceptor.message_pattern.matches(msg, false)
        })
        .cloned()
        .collect();

    for key in targets {
        let set = machine.interceptors.entry(key).or_default();
        match (&interceptor.phase, &compiled_body) {
            (Phase::Guard, CompiledBody::Guard(checks)) => {
                set.guards.push((fragment.to_string(), checks.clone()))
            }
            (Phase::Before, CompiledBody::Program(p)) => {
                set.befores.push((fragment.to_string(), p.clone()))
            }
            (Phase::After, CompiledBody::Program(p)) => {
                set.afters.push((fragment.to_string(), p.clone()))
            }
            _ => unreachable!("phase and body parsed together"),
        }
    }
    Ok(())
}

enum CompiledBody {
    Guard(Vec<GuardCheck>),
    Program(super::Program),
}

fn compile_operand(
    machine: &CompiledMachine,
    op: &GuardOperand,
) -> Result<GuardValue, CompileError> {
    Ok(match op {
        GuardOperand::Payload(field) => GuardValue::Payload(field.clone()),
        GuardOperand::Str(s) => GuardValue::Lit(Value::Str(s.clone())),
        GuardOperand::Num(d) => GuardValue::Lit(Value::Num(d.clone())),
        GuardOperand::Store(dref) => {
            let (rec, field) = Compiler::for_machine(machine).field_ref(dref)?;
            GuardValue::Store(rec, field)
        }
    })
}
