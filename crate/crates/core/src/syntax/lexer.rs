//! Lexical layer. Every byte of the input is covered either by a token or by
//! inter-token horizontal whitespace, so the token stream is lossless.

use serde::Serialize;

use crate::diag::{codes, Diagnostic, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Keyword,
    RoleMarker,
    Identifier,
    AllCapsIdentifier,
    Number,
    Operator,
    Punctuation,
    TimeRef,
    NameRef,
    InlineLiteral,
    StringLiteral,
    Comment,
    Newline,
    /// A run of characters the lexer could not classify.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: Span,
}

impl Token {
    pub fn is(&self, kind: TokenKind, lexeme: &str) -> bool {
        self.kind == kind && self.lexeme == lexeme
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.is(TokenKind::Punctuation, p)
    }

    pub fn is_op(&self, op: &str) -> bool {
        self.is(TokenKind::Operator, op)
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        self.is(TokenKind::Keyword, kw)
    }
}

pub const KEYWORDS: &[&str] = &[
    "ForEach",
    "If",
    "ElseIf",
    "Else",
    "Switch",
    "Case",
    "Default",
    "Mark",
    "Name",
    "Frag",
    "StrFrag",
    "RolesFrag",
    "RoleFrag",
    "PromptEndsHere",
    "when",
    "break",
    "continue",
    "for",
    "in",
];

const ROLE_LETTERS: &[u8] = b"SUATN";

pub fn is_all_caps(ident: &str) -> bool {
    let mut chars = ident.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

struct Lexer<'s> {
    src: &'s str,
    pos: usize,
    line: u32,
    col: u32,
    tokens: Vec<Token>,
    diags: Vec<Diagnostic>,
}

impl<'s> Lexer<'s> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(offset)
    }

    fn rest(&self) -> &'s str {
        &self.src[self.pos..]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn bump_while(&mut self, f: impl Fn(char) -> bool) {
        while let Some(c) = self.peek() {
            if !f(c) {
                break;
            }
            self.bump();
        }
    }

    fn push(&mut self, kind: TokenKind, start: usize, line: u32, col: u32) {
        let span = Span::new(start, self.pos, line, col);
        self.tokens.push(Token { kind, lexeme: self.src[start..self.pos].to_string(), span });
    }

    fn run(mut self) -> (Vec<Token>, Vec<Diagnostic>) {
        while let Some(c) = self.peek() {
            let start = self.pos;
            let (line, col) = (self.line, self.col);
            match c {
                ' ' | '\t' => {
                    self.bump();
                }
                '\n' => {
                    self.bump();
                    self.push(TokenKind::Newline, start, line, col);
                }
                '\r' if self.peek_at(1) == Some('\n') => {
                    self.bump();
                    self.bump();
                    self.push(TokenKind::Newline, start, line, col);
                }
                '/' if self.peek_at(1) == Some('/') => {
                    self.bump_while(|c| c != '\n' && c != '\r');
                    // keep trailing whitespace out of the comment lexeme
                    let text = &self.src[start..self.pos];
                    let trimmed = text.trim_end().len();
                    let end = start + trimmed;
                    let span = Span::new(start, end, line, col);
                    self.tokens.push(Token {
                        kind: TokenKind::Comment,
                        lexeme: self.src[start..end].to_string(),
                        span,
                    });
                }
                '{' if self.peek_at(1) == Some('{') => self.inline_literal(start, line, col),
                '"' => self.string(start, line, col),
                '@' => {
                    self.bump();
                    if matches!(self.peek(), Some(c) if is_ident_continue(c)) {
                        self.bump_while(is_ident_continue);
                        self.push(TokenKind::TimeRef, start, line, col);
                    } else {
                        self.push(TokenKind::Unknown, start, line, col);
                        self.diags.push(Diagnostic::error(
                            codes::LEX,
                            self.tokens.last().unwrap().span,
                            "`@` must be followed by a time variable or step number",
                        ));
                    }
                }
                '$' => {
                    self.bump();
                    if matches!(self.peek(), Some(c) if is_ident_start(c)) {
                        self.bump_while(is_ident_continue);
                        self.push(TokenKind::NameRef, start, line, col);
                    } else {
                        self.push(TokenKind::Unknown, start, line, col);
                        self.diags.push(Diagnostic::error(
                            codes::LEX,
                            self.tokens.last().unwrap().span,
                            "`$` must be followed by a name",
                        ));
                    }
                }
                c if c.is_ascii_digit() => {
                    self.bump_while(|c| c.is_ascii_digit());
                    self.push(TokenKind::Number, start, line, col);
                }
                c if is_ident_start(c) => self.word(start, line, col),
                _ => self.symbol(start, line, col),
            }
        }
        (self.tokens, self.diags)
    }

    fn word(&mut self, start: usize, line: u32, col: u32) {
        self.bump_while(is_ident_continue);
        let word = &self.src[start..self.pos];
        let single_role = word.len() == 1 && ROLE_LETTERS.contains(&word.as_bytes()[0]);
        if single_role && self.peek() == Some(':') && self.peek_at(1) != Some('=') {
            self.bump();
            self.push(TokenKind::RoleMarker, start, line, col);
        } else if KEYWORDS.contains(&word) {
            self.push(TokenKind::Keyword, start, line, col);
        } else if is_all_caps(word) {
            self.push(TokenKind::AllCapsIdentifier, start, line, col);
        } else {
            self.push(TokenKind::Identifier, start, line, col);
        }
    }

    fn inline_literal(&mut self, start: usize, line: u32, col: u32) {
        match self.rest()[2..].find("}}") {
            Some(close) if !self.rest()[2..2 + close].contains('\n') => {
                let end = self.pos + 2 + close + 2;
                while self.pos < end {
                    self.bump();
                }
                self.push(TokenKind::InlineLiteral, start, line, col);
            }
            _ => {
                self.bump();
                self.bump();
                self.push(TokenKind::Unknown, start, line, col);
                self.diags.push(Diagnostic::error(
                    codes::LEX,
                    self.tokens.last().unwrap().span,
                    "unterminated inline literal `{{`",
                ));
            }
        }
    }

    fn string(&mut self, start: usize, line: u32, col: u32) {
        self.bump();
        loop {
            match self.peek() {
                Some('"') => {
                    self.bump();
                    self.push(TokenKind::StringLiteral, start, line, col);
                    return;
                }
                Some('\\') => {
                    self.bump();
                    if matches!(self.peek(), Some(c) if c != '\n') {
                        self.bump();
                    }
                }
                Some('\n') | Some('\r') | None => {
                    self.push(TokenKind::Unknown, start, line, col);
                    self.diags.push(Diagnostic::error(
                        codes::LEX,
                        self.tokens.last().unwrap().span,
                        "unterminated string literal",
                    ));
                    return;
                }
                Some(_) => {
                    self.bump();
                }
            }
        }
    }

    fn symbol(&mut self, start: usize, line: u32, col: u32) {
        const TWO: &[&str] = &[":=", "==", "!=", "<=", ">=", "&&", "||"];
        const OPS: &[char] = &['+', '-', '*', '/', '%', '<', '>', '&', '|'];
        const PUNCT: &[char] = &['{', '}', '[', ']', '(', ')', ',', '.', ':'];
        let rest = self.rest();
        if let Some(op) = TWO.iter().find(|op| rest.starts_with(**op)) {
            self.bump();
            self.bump();
            let kind = if *op == ":=" { TokenKind::Punctuation } else { TokenKind::Operator };
            self.push(kind, start, line, col);
            return;
        }
        let c = self.bump().expect("symbol called at end of input");
        if OPS.contains(&c) {
            self.push(TokenKind::Operator, start, line, col);
        } else if PUNCT.contains(&c) {
            self.push(TokenKind::Punctuation, start, line, col);
        } else {
            self.push(TokenKind::Unknown, start, line, col);
            self.diags.push(Diagnostic::error(
                codes::LEX,
                self.tokens.last().unwrap().span,
                format!("illegal character {c:?}"),
            ));
        }
    }
}

/// Splits `source` into tokens. Illegal characters become `Unknown` tokens
/// with an `E-LEX` diagnostic; lexing always runs to the end of input.
pub fn tokenize(source: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    Lexer { src: source, pos: 0, line: 1, col: 1, tokens: Vec::new(), diags: Vec::new() }.run()
}
