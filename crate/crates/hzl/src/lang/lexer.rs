//! Tokenizer for `.hzl` contract sources and the shared action syntax.
//!
//! The lexer is mode-aware: after `>>>` it switches to template mode,
//! where arbitrary prose is collected into [`TokenKind::TemplateText`]
//! runs until `@ref`, `-->` or the closing `<<<`. `//` comments run to
//! end of line outside templates.

use thiserror::Error;

use crate::span::Pos;

use super::token::{Token, TokenKind};

/// One unit of contract source text plus where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub text: String,
    /// File path or inline label; used in diagnostics and as the
    /// actor's qualified-name prefix.
    pub origin: String,
}

impl SourceUnit {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        SourceUnit {
            text: text.into(),
            origin: origin.into(),
        }
    }

    /// Actor name: the file stem of the origin ("dir/buysell.hzl" -> "buysell").
    pub fn actor_name(&self) -> String {
        let base = self
            .origin
            .rsplit(['/', '\\'])
            .next()
            .unwrap_or(&self.origin);
        match base.rsplit_once('.') {
            Some((stem, _)) if !stem.is_empty() => stem.to_string(),
            _ => base.to_string(),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{origin}:{pos}: {kind}")]
pub struct LexError {
    pub origin: String,
    pub pos: Pos,
    pub kind: LexErrorKind,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LexErrorKind {
    #[error("empty input")]
    EmptyInput,
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("expected identifier after '{0}'")]
    MissingIdent(char),
    #[error("unterminated string literal")]
    UnterminatedString,
    #[error("unterminated quoted string")]
    UnterminatedQuoted,
    #[error("unterminated compose template (missing '<<<')")]
    UnterminatedTemplate,
    #[error("malformed number literal")]
    MalformedNumber,
}

struct Lexer<'a> {
    src: &'a [u8],
    origin: &'a str,
    i: usize,
    line: u32,
    col: u32,
    out: Vec<Token>,
}

/// Tokenize a source unit. Every token carries its starting line:column.
pub fn tokenize(src: &SourceUnit) -> Result<Vec<Token>, LexError> {
    let mut lx = Lexer {
        src: src.text.as_bytes(),
        origin: &src.origin,
        i: 0,
        line: 1,
        col: 1,
        out: Vec::new(),
    };
    lx.run()?;
    if lx.out.is_empty() {
        return Err(lx.err_at(Pos::start(), LexErrorKind::EmptyInput));
    }
    Ok(lx.out)
}

impl<'a> Lexer<'a> {
    fn pos(&self) -> Pos {
        Pos::new(self.line, self.col)
    }

    fn err_at(&self, pos: Pos, kind: LexErrorKind) -> LexError {
        LexError {
            origin: self.origin.to_string(),
            pos,
            kind,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.i).copied()
    }

    fn peek_at(&self, off: usize) -> Option<u8> {
        self.src.get(self.i + off).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.i += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.i..].starts_with(s.as_bytes())
    }

    fn bump_n(&mut self, n: usize) {
        for _ in 0..n {
            self.bump();
        }
    }

    fn emit(&mut self, kind: TokenKind, pos: Pos) {
        self.out.push(Token::new(kind, pos));
    }

    fn run(&mut self) -> Result<(), LexError> {
        while let Some(b) = self.peek() {
            let pos = self.pos();
            match b {
                b' ' | b'\t' | b'\r' | b'\n' => {
                    self.bump();
                }
                b'/' if self.peek_at(1) == Some(b'/') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                b'{' => {
                    self.bump();
                    self.emit(TokenKind::LBrace, pos);
                }
                b'}' => {
                    self.bump();
                    self.emit(TokenKind::RBrace, pos);
                }
                b',' => {
                    self.bump();
                    self.emit(TokenKind::Comma, pos);
                }
                b'?' => {
                    self.bump();
                    self.emit(TokenKind::Wildcard, pos);
                }
                b'_' => {
                    self.bump();
                    self.emit(TokenKind::Underscore, pos);
                }
                b':' => {
                    self.bump();
                    self.emit(TokenKind::Colon, pos);
                }
                b'=' => {
                    self.bump();
                    if self.peek() == Some(b'>') {
                        self.bump();
                        self.emit(TokenKind::Arrow, pos);
                    } else {
                        self.emit(TokenKind::Eq, pos);
                    }
                }
                b'!' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        self.emit(TokenKind::Neq, pos);
                    } else {
                        return Err(self.err_at(pos, LexErrorKind::UnexpectedChar('!')));
                    }
                }
                b'<' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                        self.emit(TokenKind::Le, pos);
                    } else {
                        self.emit(TokenKind::Lt, pos);
                    }
                }
                b'>' => {
                    if self.starts_with(">>>") {
                        self.bump_n(3);
                        self.emit(TokenKind::ComposeOpen, pos);
                        self.lex_template()?;
                    } else {
                        self.bump();
                        if self.peek() == Some(b'=') {
                            self.bump();
                            self.emit(TokenKind::Ge, pos);
                        } else {
                            self.emit(TokenKind::Gt, pos);
                        }
                    }
                }
                b'#' => {
                    self.bump();
                    let name = self
                        .take_ident()
                        .ok_or_else(|| self.err_at(pos, LexErrorKind::MissingIdent('#')))?;
                    self.emit(TokenKind::Handler(name), pos);
                }
                b'$' => {
                    self.bump();
                    let name = self
                        .take_ident()
                        .ok_or_else(|| self.err_at(pos, LexErrorKind::MissingIdent('$')))?;
                    self.emit(TokenKind::StateRef(name), pos);
                }
                b'@' => {
                    self.bump();
                    let (root, field) = self.take_ref_body(pos, '@')?;
                    self.emit(TokenKind::DataRef(root, field), pos);
                }
                b'*' => {
                    self.bump();
                    if matches!(self.peek(), Some(c) if c.is_ascii_alphabetic()) {
                        let (root, field) = self.take_ref_body(pos, '*')?;
                        self.emit(TokenKind::StarRef(root, field), pos);
                    } else {
                        self.emit(TokenKind::Star, pos);
                    }
                }
                b'\'' => {
                    self.bump();
                    let mut text = String::new();
                    loop {
                        match self.bump() {
                            Some(b'\'') => break,
                            Some(b'\n') | None => {
                                return Err(self.err_at(pos, LexErrorKind::UnterminatedQuoted))
                            }
                            Some(c) => text.push(c as char),
                        }
                    }
                    self.emit(TokenKind::Quoted(text), pos);
                }
                b'"' => {
                    self.bump();
                    let mut text = String::new();
                    loop {
                        match self.bump() {
                            Some(b'"') => break,
                            Some(b'\\') => match self.bump() {
                                Some(b'"') => text.push('"'),
                                Some(b'\\') => text.push('\\'),
                                Some(b'n') => text.push('\n'),
                                _ => return Err(self.err_at(pos, LexErrorKind::UnterminatedString)),
                            },
                            Some(b'\n') | None => {
                                return Err(self.err_at(pos, LexErrorKind::UnterminatedString))
                            }
                            Some(c) => text.push(c as char),
                        }
                    }
                    self.emit(TokenKind::Str(text), pos);
                }
                b'-' => {
                    self.bump();
                    if !matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                        return Err(self.err_at(pos, LexErrorKind::MalformedNumber));
                    }
                    let body = self.take_number(pos)?;
                    self.emit(TokenKind::Num(format!("-{body}")), pos);
                }
                b'0'..=b'9' => {
                    let body = self.take_number(pos)?;
                    self.emit(TokenKind::Num(body), pos);
                }
                c if c.is_ascii_alphabetic() => {
                    let name = self.take_ident().expect("alphabetic start");
                    self.emit(TokenKind::Ident(name), pos);
                }
                c => return Err(self.err_at(pos, LexErrorKind::UnexpectedChar(c as char))),
            }
        }
        Ok(())
    }

    fn take_ident(&mut self) -> Option<String> {
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() => {}
            _ => return None,
        }
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                s.push(c as char);
                self.bump();
            } else {
                break;
            }
        }
        Some(s)
    }

    fn take_ref_body(
        &mut self,
        pos: Pos,
        sigil: char,
    ) -> Result<(String, Option<String>), LexError> {
        let root = self
            .take_ident()
            .ok_or_else(|| self.err_at(pos, LexErrorKind::MissingIdent(sigil)))?;
        if self.peek() == Some(b'.') {
            self.bump();
            let field = self
                .take_ident()
                .ok_or_else(|| self.err_at(pos, LexErrorKind::MissingIdent('.')))?;
            Ok((root, Some(field)))
        } else {
            Ok((root, None))
        }
    }

    fn take_number(&mut self, pos: Pos) -> Result<String, LexError> {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                s.push(c as char);
                self.bump();
            } else {
                break;
            }
        }
        if self.peek() == Some(b'.') && matches!(self.peek_at(1), Some(c) if c.is_ascii_digit()) {
            s.push('.');
            self.bump();
            while let Some(c) = self.peek() {
                if c.is_ascii_digit() {
                    s.push(c as char);
                    self.bump();
                } else {
                    break;
                }
            }
        } else if self.peek() == Some(b'.') {
            return Err(self.err_at(pos, LexErrorKind::MalformedNumber));
        }
        Ok(s)
    }

    /// Template mode: raw text until `@ref`, `-->` or `<<<`.
    fn lex_template(&mut self) -> Result<(), LexError> {
        let open_pos = self.pos();
        let mut text = String::new();
        let mut text_pos = self.pos();
        loop {
            if self.starts_with("<<<") {
                self.flush_text(&mut text, text_pos);
                let pos = self.pos();
                self.bump_n(3);
                self.emit(TokenKind::ComposeClose, pos);
                return Ok(());
            }
            if self.starts_with("-->") {
                self.flush_text(&mut text, text_pos);
                let pos = self.pos();
                self.bump_n(3);
                self.emit(TokenKind::Continuation, pos);
                text_pos = self.pos();
                continue;
            }
            match self.peek() {
                None => return Err(self.err_at(open_pos, LexErrorKind::UnterminatedTemplate)),
                Some(b'@') => {
                    self.flush_text(&mut text, text_pos);
                    let pos = self.pos();
                    self.bump();
                    let (root, field) = self.take_ref_body(pos, '@')?;
                    self.emit(TokenKind::DataRef(root, field), pos);
                    text_pos = self.pos();
                }
                Some(c) => {
                    if text.is_empty() {
                        text_pos = self.pos();
                    }
                    text.push(c as char);
                    self.bump();
                }
            }
        }
    }

    fn flush_text(&mut self, text: &mut String, pos: Pos) {
        if !text.is_empty() {
            let t = std::mem::take(text);
            self.emit(TokenKind::TemplateText(t), pos);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        tokenize(&SourceUnit::new(text, "<test>"))
            .unwrap()
            .into_iter()
            .map(|t| t.kind)
            .collect()
    }

    #[test]
    fn transition_action() {
        assert_eq!(
            kinds("transitionTo { $OPEN }"),
            vec![
                TokenKind::Ident("transitionTo".into()),
                TokenKind::LBrace,
                TokenKind::StateRef("OPEN".into()),
                TokenKind::RBrace,
            ]
        );
    }

    #[test]
    fn wildcard_field() {
        assert_eq!(
            kinds("price {?}"),
            vec![
                TokenKind::Ident("price".into()),
                TokenKind::LBrace,
                TokenKind::Wildcard,
                TokenKind::RBrace,
            ]
        );
    }

    #[test]
    fn empty_input_is_an_error() {
        let err = tokenize(&SourceUnit::new("", "<test>")).unwrap_err();
        assert_eq!(err.kind, LexErrorKind::EmptyInput);
        let err = tokenize(&SourceUnit::new("  \n ", "<test>")).unwrap_err();
        assert_eq!(err.kind, LexErrorKind::EmptyInput);
    }

    #[test]
    fn positions_are_one_based() {
        let toks = tokenize(&SourceUnit::new("a\n  bb", "<test>")).unwrap();
        assert_eq!(toks[0].pos, Pos::new(1, 1));
        assert_eq!(toks[1].pos, Pos::new(2, 3));
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(
            kinds("a // rest of line\nb"),
            vec![TokenKind::Ident("a".into()), TokenKind::Ident("b".into())]
        );
    }

    #[test]
    fn refs_and_sigils() {
        assert_eq!(
            kinds("map { *THIS, @buyoffer }"),
            vec![
                TokenKind::Ident("map".into()),
                TokenKind::LBrace,
                TokenKind::StarRef("THIS".into(), None),
                TokenKind::Comma,
                TokenKind::DataRef("buyoffer".into(), None),
                TokenKind::RBrace,
            ]
        );
        assert_eq!(
            kinds("@contract.buyer"),
            vec![TokenKind::DataRef("contract".into(), Some("buyer".into()))]
        );
        assert_eq!(kinds("#Enter"), vec![TokenKind::Handler("Enter".into())]);
    }

    #[test]
    fn template_mode() {
        let toks = kinds(">>> Notice: Buy @c.q unit\n  --> of @c.p <<<");
        assert_eq!(
            toks,
            vec![
                TokenKind::ComposeOpen,
                TokenKind::TemplateText(" Notice: Buy ".into()),
                TokenKind::DataRef("c".into(), Some("q".into())),
                TokenKind::TemplateText(" unit\n  ".into()),
                TokenKind::Continuation,
                TokenKind::TemplateText(" of ".into()),
                TokenKind::DataRef("c".into(), Some("p".into())),
                TokenKind::TemplateText(" ".into()),
                TokenKind::ComposeClose,
            ]
        );
    }

    #[test]
    fn unterminated_template() {
        let err = tokenize(&SourceUnit::new(">>> dangling", "<test>")).unwrap_err();
        assert_eq!(err.kind, LexErrorKind::UnterminatedTemplate);
    }

    #[test]
    fn numbers() {
        assert_eq!(kinds("10"), vec![TokenKind::Num("10".into())]);
        assert_eq!(kinds("-3.25"), vec![TokenKind::Num("-3.25".into())]);
        assert!(tokenize(&SourceUnit::new("3.", "<t>")).is_err());
    }

    #[test]
    fn alphabet_violation_carries_position() {
        let err = tokenize(&SourceUnit::new("a ;", "<test>")).unwrap_err();
        assert_eq!(err.kind, LexErrorKind::UnexpectedChar(';'));
        assert_eq!(err.pos, Pos::new(1, 3));
    }

    #[test]
    fn quoted_noop_and_strings() {
        assert_eq!(
            kinds("'do nothing'"),
            vec![TokenKind::Quoted("do nothing".into())]
        );
        assert_eq!(kinds("\"X\""), vec![TokenKind::Str("X".into())]);
        assert_eq!(kinds("\"a\\\"b\""), vec![TokenKind::Str("a\"b".into())]);
    }

    #[test]
    fn comparison_operators() {
        assert_eq!(
            kinds("a <= 100"),
            vec![
                TokenKind::Ident("a".into()),
                TokenKind::Le,
                TokenKind::Num("100".into())
            ]
        );
        assert_eq!(
            kinds("= => != < > >="),
            vec![
                TokenKind::Eq,
                TokenKind::Arrow,
                TokenKind::Neq,
                TokenKind::Lt,
                TokenKind::Gt,
                TokenKind::Ge,
            ]
        );
    }

    #[test]
    fn actor_name_from_origin() {
        assert_eq!(
            SourceUnit::new("x", "dir/buysell.hzl").actor_name(),
            "buysell"
        );
        assert_eq!(SourceUnit::new("x", "inline").actor_name(), "inline");
    }
}
