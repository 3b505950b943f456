use std::fmt;

use crate::span::Pos;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// Bare identifier; keywords are recognized contextually.
    Ident(String),
    /// `#name` — handler trigger.
    Handler(String),
    /// `$Name` — state reference.
    StateRef(String),
    /// `@root` or `@root.field` — data reference.
    DataRef(String, Option<String>),
    /// `*THIS` or `*THIS.field` — message payload reference.
    StarRef(String, Option<String>),
    /// `'...'` — quoted no-op string.
    Quoted(String),
    /// `"..."` — string literal.
    Str(String),
    /// Numeric literal, normalized later.
    Num(String),
    /// Raw text run inside a compose body.
    TemplateText(String),
    LBrace,
    RBrace,
    Comma,
    /// `=>`
    Arrow,
    /// `>>>`
    ComposeOpen,
    /// `<<<`
    ComposeClose,
    /// `-->` line continuation inside a compose body.
    Continuation,
    /// `?` — unbound field initializer.
    Wildcard,
    /// `_` — self-hold transition target.
    Underscore,
    /// `:` — selector separator in behavior fragments.
    Colon,
    /// Bare `*` — wildcard in behavior fragment selectors.
    Star,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl TokenKind {
    /// Short description used in "expected X, found Y" errors.
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier '{s}'"),
            TokenKind::Handler(s) => format!("'#{s}'"),
            TokenKind::StateRef(s) => format!("'${s}'"),
            TokenKind::DataRef(r, None) => format!("'@{r}'"),
            TokenKind::DataRef(r, Some(f)) => format!("'@{r}.{f}'"),
            TokenKind::StarRef(r, None) => format!("'*{r}'"),
            TokenKind::StarRef(r, Some(f)) => format!("'*{r}.{f}'"),
            TokenKind::Quoted(_) => "quoted string".into(),
            TokenKind::Str(_) => "string literal".into(),
            TokenKind::Num(n) => format!("number '{n}'"),
            TokenKind::TemplateText(_) => "template text".into(),
            TokenKind::LBrace => "'{'".into(),
            TokenKind::RBrace => "'}'".into(),
            TokenKind::Comma => "','".into(),
            TokenKind::Arrow => "'=>'".into(),
            TokenKind::ComposeOpen => "'>>>'".into(),
            TokenKind::ComposeClose => "'<<<'".into(),
            TokenKind::Continuation => "'-->'".into(),
            TokenKind::Wildcard => "'?'".into(),
            TokenKind::Underscore => "'_'".into(),
            TokenKind::Colon => "':'".into(),
            TokenKind::Star => "'*'".into(),
            TokenKind::Eq => "'='".into(),
            TokenKind::Neq => "'!='".into(),
            TokenKind::Lt => "'<'".into(),
            TokenKind::Le => "'<='".into(),
            TokenKind::Gt => "'>'".into(),
            TokenKind::Ge => "'>='".into(),
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

impl Token {
    pub fn new(kind: TokenKind, pos: Pos) -> Self {
        Token { kind, pos }
    }
}
