//! Recursive-descent parser for ACTOR source units.
//!
//! Commas are separators in the published grammar; the parser accepts
//! them as optional between items (and trailing), while the pretty
//! printer always emits the canonical grammar form.

use thiserror::Error;

use crate::span::{Name, Pos, Span};

use super::ast::*;
use super::lexer::{tokenize, LexError, SourceUnit};
use super::token::{Token, TokenKind};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{origin}:{pos}: expected {}, found {found}", expected.join(" or "))]
    Unexpected {
        origin: String,
        pos: Pos,
        expected: Vec<String>,
        found: String,
    },
    #[error("{origin}:{pos}: unknown action '{keyword}'")]
    UnknownAction {
        origin: String,
        pos: Pos,
        keyword: String,
    },
}

impl ParseError {
    pub fn pos(&self) -> Pos {
        match self {
            ParseError::Unexpected { pos, .. } | ParseError::UnknownAction { pos, .. } => *pos,
        }
    }
}

/// Lex or parse failure from the convenience entry points.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LangError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Parse a token stream produced by [`tokenize`].
pub fn parse(tokens: &[Token], origin: &str) -> Result<ActorDefinition, ParseError> {
    let mut p = Parser {
        tokens,
        i: 0,
        origin,
    };
    let def = p.parse_actor()?;
    if p.i < p.tokens.len() {
        return Err(p.unexpected(&["end of input"]));
    }
    Ok(def)
}

/// Tokenize and parse a source unit.
pub fn parse_source(src: &SourceUnit) -> Result<ActorDefinition, LangError> {
    let tokens = tokenize(src)?;
    Ok(parse(&tokens, &src.origin)?)
}

/// Parse a brace-enclosed action list: `{ action ("," action)* }`.
/// Shared with the behavior-fragment loader.
pub(crate) fn parse_action_block(p: &mut Parser<'_>) -> Result<Vec<Action>, ParseError> {
    p.expect_lbrace()?;
    let mut actions = Vec::new();
    while !p.at(&TokenKind::RBrace) {
        actions.push(p.parse_action()?);
        p.eat_comma();
    }
    p.expect_rbrace()?;
    Ok(actions)
}

pub(crate) struct Parser<'a> {
    pub(crate) tokens: &'a [Token],
    pub(crate) i: usize,
    pub(crate) origin: &'a str,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(tokens: &'a [Token], origin: &'a str) -> Self {
        Parser {
            tokens,
            i: 0,
            origin,
        }
    }

    pub(crate) fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.i).map(|t| &t.kind)
    }

    pub(crate) fn pos(&self) -> Pos {
        self.tokens
            .get(self.i)
            .or_else(|| self.tokens.last())
            .map(|t| t.pos)
            .unwrap_or_else(Pos::start)
    }

    pub(crate) fn bump(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.i);
        if t.is_some() {
            self.i += 1;
        }
        t
    }

    pub(crate) fn at(&self, kind: &TokenKind) -> bool {
        self.peek() == Some(kind)
    }

    pub(crate) fn at_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Some(TokenKind::Ident(w)) if w == word)
    }

    pub(crate) fn eat_comma(&mut self) {
        if self.at(&TokenKind::Comma) {
            self.bump();
        }
    }

    pub(crate) fn unexpected(&self, expected: &[&str]) -> ParseError {
        let found = match self.tokens.get(self.i) {
            Some(t) => t.kind.describe(),
            None => "end of input".to_string(),
        };
        ParseError::Unexpected {
            origin: self.origin.to_string(),
            pos: self.pos(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        }
    }

    pub(crate) fn expect_keyword(&mut self, word: &str) -> Result<Pos, ParseError> {
        if self.at_ident(word) {
            let pos = self.pos();
            self.bump();
            Ok(pos)
        } else {
            Err(self.unexpected(&[&format!("'{word}'")]))
        }
    }

    pub(crate) fn expect_lbrace(&mut self) -> Result<(), ParseError> {
        if self.at(&TokenKind::LBrace) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&["'{'"]))
        }
    }

    pub(crate) fn expect_rbrace(&mut self) -> Result<(), ParseError> {
        if self.at(&TokenKind::RBrace) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&["'}'"]))
        }
    }

    pub(crate) fn expect_comma(&mut self) -> Result<(), ParseError> {
        if self.at(&TokenKind::Comma) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&["','"]))
        }
    }

    pub(crate) fn take_name(&mut self, what: &str) -> Result<Name, ParseError> {
        match self.peek() {
            Some(TokenKind::Ident(w)) => {
                let name = Name::new(w.clone(), self.pos());
                self.bump();
                Ok(name)
            }
            _ => Err(self.unexpected(&[what])),
        }
    }

    pub(crate) fn take_data_ref(&mut self) -> Result<DataRef, ParseError> {
        match self.peek() {
            Some(TokenKind::DataRef(root, field)) => {
                let pos = self.pos();
                let dref = DataRef {
                    record: Name::new(root.clone(), pos),
                    field: field.as_ref().map(|f| Name::new(f.clone(), pos)),
                };
                self.bump();
                Ok(dref)
            }
            _ => Err(self.unexpected(&["data reference '@name'"])),
        }
    }

    fn take_root_ref(&mut self, what: &str) -> Result<DataRef, ParseError> {
        let dref = self.take_data_ref()?;
        if dref.field.is_some() {
            return Err(ParseError::Unexpected {
                origin: self.origin.to_string(),
                pos: dref.record.pos,
                expected: vec![what.to_string()],
                found: format!("field reference '{dref}'"),
            });
        }
        Ok(dref)
    }

    fn parse_actor(&mut self) -> Result<ActorDefinition, ParseError> {
        let start = self.pos();
        self.expect_keyword("ACTOR")?;
        self.expect_lbrace()?;
        let records = self.parse_data()?;
        let states = self.parse_model()?;
        let end = self.pos();
        self.expect_rbrace()?;
        Ok(ActorDefinition {
            records,
            states,
            source_span: Span::new(start, end),
            origin: self.origin.to_string(),
        })
    }

    fn parse_data(&mut self) -> Result<Vec<RecordDecl>, ParseError> {
        self.expect_keyword("DATA")?;
        self.expect_lbrace()?;
        let mut records = Vec::new();
        while !self.at(&TokenKind::RBrace) {
            records.push(self.parse_record()?);
            self.eat_comma();
        }
        self.expect_rbrace()?;
        Ok(records)
    }

    fn parse_record(&mut self) -> Result<RecordDecl, ParseError> {
        let name = self.take_name("record name")?;
        self.expect_lbrace()?;
        let mut fields = Vec::new();
        loop {
            fields.push(self.parse_field()?);
            self.eat_comma();
            if self.at(&TokenKind::RBrace) {
                break;
            }
        }
        self.expect_rbrace()?;
        Ok(RecordDecl { name, fields })
    }

    fn parse_field(&mut self) -> Result<FieldDecl, ParseError> {
        let name = self.take_name("field name")?;
        self.expect_lbrace()?;
        let init = match self.peek() {
            Some(TokenKind::Wildcard) => {
                self.bump();
                FieldInit::Wildcard
            }
            Some(TokenKind::Str(s)) => {
                let lit = FieldInit::Literal(Literal::Str(s.clone()));
                self.bump();
                lit
            }
            Some(TokenKind::Num(n)) => {
                let dec = n.parse().map_err(|_| self.unexpected(&["number"]))?;
                self.bump();
                FieldInit::Literal(Literal::Num(dec))
            }
            _ => return Err(self.unexpected(&["'?'", "string literal", "number"])),
        };
        self.expect_rbrace()?;
        Ok(FieldDecl { name, init })
    }

    fn parse_model(&mut self) -> Result<Vec<StateDecl>, ParseError> {
        self.expect_keyword("MODEL")?;
        self.expect_lbrace()?;
        let mut states = Vec::new();
        loop {
            states.push(self.parse_state()?);
            self.eat_comma();
            if self.at(&TokenKind::RBrace) {
                break;
            }
        }
        self.expect_rbrace()?;
        Ok(states)
    }

    fn parse_state(&mut self) -> Result<StateDecl, ParseError> {
        let name = self.take_name("state name")?;
        self.expect_lbrace()?;
        let mut handlers = Vec::new();
        loop {
            handlers.push(self.parse_handler()?);
            self.eat_comma();
            if self.at(&TokenKind::RBrace) {
                break;
            }
        }
        self.expect_rbrace()?;
        Ok(StateDecl { name, handlers })
    }

    fn parse_handler(&mut self) -> Result<HandlerDecl, ParseError> {
        let (word, pos) = match self.peek() {
            Some(TokenKind::Handler(w)) => (w.clone(), self.pos()),
            _ => return Err(self.unexpected(&["handler '#name'"])),
        };
        self.bump();
        let name = Name::new(word.clone(), pos);
        let trigger = match word.as_str() {
            "Enter" => Trigger::Enter(name),
            "Exit" => Trigger::Exit(name),
            _ => Trigger::Message(name),
        };
        let actions = parse_action_block(self)?;
        if actions.is_empty() {
            return Err(self.unexpected(&["action ('do nothing' for an empty handler)"]));
        }
        Ok(HandlerDecl { trigger, actions })
    }

    pub(crate) fn parse_action(&mut self) -> Result<Action, ParseError> {
        match self.peek() {
            Some(TokenKind::Quoted(_)) => {
                self.bump();
                Ok(Action::NoOp)
            }
            Some(TokenKind::Ident(w)) => match w.as_str() {
                "transitionTo" => {
                    self.bump();
                    self.parse_transition()
                }
                "map" => {
                    self.bump();
                    self.parse_map()
                }
                "match" => {
                    self.bump();
                    self.parse_match()
                }
                "send" => {
                    self.bump();
                    self.parse_send()
                }
                "terminateActor" => {
                    self.bump();
                    Ok(Action::TerminateActor)
                }
                other => Err(ParseError::UnknownAction {
                    origin: self.origin.to_string(),
                    pos: self.pos(),
                    keyword: other.to_string(),
                }),
            },
            _ => Err(self.unexpected(&["action"])),
        }
    }

    /// Both spellings normalize to one node:
    /// `transitionTo { $X }` and `transitionTo => $X`.
    fn parse_transition(&mut self) -> Result<Action, ParseError> {
        let braced = match self.peek() {
            Some(TokenKind::LBrace) => {
                self.bump();
                true
            }
            Some(TokenKind::Arrow) => {
                self.bump();
                false
            }
            _ => return Err(self.unexpected(&["'{'", "'=>'"])),
        };
        let target = match self.peek() {
            Some(TokenKind::StateRef(name)) => {
                let t = StateTarget::State(Name::new(name.clone(), self.pos()));
                self.bump();
                t
            }
            Some(TokenKind::Underscore) => {
                self.bump();
                StateTarget::SelfHold
            }
            _ => return Err(self.unexpected(&["state reference '$Name'", "'_'"])),
        };
        if braced {
            self.expect_rbrace()?;
        }
        Ok(Action::TransitionTo(target))
    }

    fn parse_map(&mut self) -> Result<Action, ParseError> {
        self.expect_lbrace()?;
        match self.peek() {
            Some(TokenKind::StarRef(root, None)) if root == "THIS" => {
                self.bump();
            }
            _ => return Err(self.unexpected(&["'*THIS'"])),
        }
        self.expect_comma()?;
        let target = self.take_root_ref("record reference '@name'")?;
        self.expect_rbrace()?;
        Ok(Action::MapThis { target })
    }

    fn parse_match(&mut self) -> Result<Action, ParseError> {
        self.expect_lbrace()?;
        let left = self.take_root_ref("record reference '@name'")?;
        self.expect_comma()?;
        let right = self.take_root_ref("record reference '@name'")?;
        self.eat_comma();
        let mut into = None;
        if self.at_ident("into") {
            self.bump();
            into = Some(self.take_root_ref("record reference '@name'")?);
            self.eat_comma();
        }
        let on_success = self.parse_match_branch("SUCCEEDS")?;
        self.eat_comma();
        let on_fail = self.parse_match_branch("FAILS")?;
        self.eat_comma();
        self.expect_rbrace()?;
        Ok(Action::Match {
            left,
            right,
            into,
            on_success,
            on_fail,
        })
    }

    /// `@SUCCEEDS { actions }` or `@FAILS action` — block or single action.
    fn parse_match_branch(&mut self, marker: &str) -> Result<Vec<Action>, ParseError> {
        match self.peek() {
            Some(TokenKind::DataRef(root, None)) if root == marker => {
                self.bump();
            }
            _ => return Ok(Vec::new()),
        }
        if self.at(&TokenKind::LBrace) {
            let mut actions = Vec::new();
            self.bump();
            while !self.at(&TokenKind::RBrace) {
                actions.push(self.parse_action()?);
                self.eat_comma();
            }
            self.expect_rbrace()?;
            Ok(actions)
        } else {
            Ok(vec![self.parse_action()?])
        }
    }

    fn parse_send(&mut self) -> Result<Action, ParseError> {
        self.expect_lbrace()?;
        let address = self.take_data_ref()?;
        self.expect_comma()?;
        self.expect_keyword("compose")?;
        if !self.at(&TokenKind::ComposeOpen) {
            return Err(self.unexpected(&["'>>>'"]));
        }
        self.bump();
        let template = self.parse_template()?;
        self.eat_comma();
        self.expect_rbrace()?;
        Ok(Action::Send { address, template })
    }

    /// Assemble template segments, collapsing `-->` continuations and
    /// whitespace runs to single spaces and trimming the outer edges.
    fn parse_template(&mut self) -> Result<Template, ParseError> {
        enum Part {
            Text(String),
            Field(DataRef),
        }
        let mut parts: Vec<Part> = Vec::new();
        loop {
            match self.peek() {
                Some(TokenKind::ComposeClose) => {
                    self.bump();
                    break;
                }
                Some(TokenKind::TemplateText(t)) => {
                    let t = t.clone();
                    self.bump();
                    match parts.last_mut() {
                        Some(Part::Text(prev)) => prev.push_str(&t),
                        _ => parts.push(Part::Text(t)),
                    }
                }
                Some(TokenKind::Continuation) => {
                    self.bump();
                    match parts.last_mut() {
                        Some(Part::Text(prev)) => prev.push(' '),
                        _ => parts.push(Part::Text(" ".into())),
                    }
                }
                Some(TokenKind::DataRef(root, field)) => {
                    let pos = self.pos();
                    let Some(field) = field else {
                        return Err(self.unexpected(&["field reference '@record.field'"]));
                    };
                    let dref = DataRef {
                        record: Name::new(root.clone(), pos),
                        field: Some(Name::new(field.clone(), pos)),
                    };
                    self.bump();
                    parts.push(Part::Field(dref));
                }
                _ => return Err(self.unexpected(&["'<<<'"])),
            }
        }

        let last_text_idx = parts
            .iter()
            .rposition(|p| matches!(p, Part::Text(_)))
            .unwrap_or(usize::MAX);
        let mut segments = Vec::new();
        for (idx, part) in parts.iter().enumerate() {
            match part {
                Part::Field(dref) => segments.push(TemplateSegment::Field(dref.clone())),
                Part::Text(raw) => {
                    let mut norm = collapse_whitespace(raw);
                    if idx == 0 {
                        norm = norm.trim_start().to_string();
                    }
                    if idx == last_text_idx && idx == parts.len() - 1 {
                        norm = norm.trim_end().to_string();
                    }
                    if !norm.is_empty() {
                        segments.push(TemplateSegment::Text(norm));
                    }
                }
            }
        }
        Ok(Template { segments })
    }
}

fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_ws = false;
    for c in s.chars() {
        if c.is_whitespace() {
            if !in_ws {
                out.push(' ');
            }
            in_ws = true;
        } else {
            out.push(c);
            in_ws = false;
        }
    }
    out
}
