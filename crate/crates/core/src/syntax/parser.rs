//! Recursive-descent parser.
//!
//! Bodies are line oriented: one statement or content element per line, with
//! newlines acting as soft terminators and braces overriding them. On an
//! error the parser skips to the end of the offending line (or the matching
//! brace) and keeps going, so one run can report many problems.

use crate::diag::{codes, Diagnostic, Span};
use crate::syntax::ast::*;
use crate::syntax::lexer::{tokenize, Token, TokenKind};

/// Parses a whole source file. Never fails; problems become diagnostics.
pub fn parse(source: &str) -> (Document, Vec<Diagnostic>) {
    let (tokens, mut diags) = tokenize(source);
    let mut p = Parser::new(tokens, source.len());
    let doc = p.document();
    diags.extend(p.diags);
    (doc, diags)
}

/// Parses a single block at top level (`in_role = false`) or inside a role
/// message body (`in_role = true`).
pub fn parse_block(source: &str, in_role: bool) -> (Option<Block>, Vec<Diagnostic>) {
    let (tokens, mut diags) = tokenize(source);
    let mut p = Parser::new(tokens, source.len());
    p.skip_newlines();
    let block = if p.at_eof() {
        None
    } else if p.peek().kind == TokenKind::Comment {
        Some(p.comment_block())
    } else {
        p.block(in_role).ok()
    };
    p.skip_newlines();
    if !p.at_eof() {
        let t = p.peek().clone();
        p.error(codes::SYNTAX, t.span, format!("unexpected `{}` after block", t.lexeme));
    }
    diags.extend(p.diags);
    (block, diags)
}

/// Parses a single expression (condition, index, or argument syntax).
pub fn parse_expr(source: &str) -> (Option<Expr>, Vec<Diagnostic>) {
    let (tokens, mut diags) = tokenize(source);
    let mut p = Parser::new(tokens, source.len());
    let expr = p.expr().ok();
    if !p.at_eof() {
        let t = p.peek().clone();
        p.error(codes::SYNTAX, t.span, format!("unexpected `{}` after expression", t.lexeme));
    }
    diags.extend(p.diags);
    (expr, diags)
}

/// Parses a condition: an expression whose bare `@X.0` atoms read as booleans.
pub fn parse_condition(source: &str) -> (Option<Expr>, Vec<Diagnostic>) {
    let (e, diags) = parse_expr(source);
    (e.map(mark_substep_atoms), diags)
}

/// Marker for "a diagnostic was already recorded; unwind to a recovery point".
#[derive(Debug)]
struct Bail;

type PResult<T> = Result<T, Bail>;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    eof: Token,
    diags: Vec<Diagnostic>,
    unclosed_reported: bool,
}

const NAMESPACES: &[&str] = &["env", "sys", "resp"];

impl Parser {
    fn new(tokens: Vec<Token>, len: usize) -> Self {
        let (line, col) = tokens
            .last()
            .map(|t| {
                let nl = t.kind == TokenKind::Newline;
                if nl {
                    (t.span.line + 1, 1)
                } else {
                    (t.span.line, t.span.col + t.lexeme.chars().count() as u32)
                }
            })
            .unwrap_or((1, 1));
        let eof = Token {
            kind: TokenKind::Newline,
            lexeme: String::new(),
            span: Span::new(len, len, line, col),
        };
        Parser { tokens, pos: 0, eof, diags: Vec::new(), unclosed_reported: false }
    }

    // -- token cursor ------------------------------------------------------

    fn at_eof(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> &Token {
        self.tokens.get(self.pos).unwrap_or(&self.eof)
    }

    fn peek_nth(&self, n: usize) -> &Token {
        self.tokens.get(self.pos + n).unwrap_or(&self.eof)
    }

    fn prev_span(&self) -> Span {
        if self.pos == 0 {
            return self.eof.span;
        }
        self.tokens[self.pos - 1].span
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if !self.at_eof() {
            self.pos += 1;
        }
        t
    }

    fn at_newline(&self) -> bool {
        self.at_eof() || self.peek().kind == TokenKind::Newline
    }

    /// True when the current token ends a statement line.
    fn at_line_end(&self) -> bool {
        self.at_newline() || self.peek().kind == TokenKind::Comment || self.peek().is_punct("}")
    }

    fn skip_newlines(&mut self) {
        while !self.at_eof() && self.peek().kind == TokenKind::Newline {
            self.pos += 1;
        }
    }

    /// Skips newlines and comments; used inside brackets and between `Switch` cases.
    fn skip_trivia(&mut self) {
        while !self.at_eof()
            && matches!(self.peek().kind, TokenKind::Newline | TokenKind::Comment)
        {
            self.pos += 1;
        }
    }

    /// Adjacent means no whitespace between the previous token and the current one.
    fn adjacent(&self) -> bool {
        self.pos > 0 && !self.at_eof() && self.tokens[self.pos - 1].span.end == self.peek().span.start
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.peek().is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error(&mut self, code: &'static str, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(code, span, msg));
    }

    fn expected(&mut self, what: &str) -> Bail {
        let t = self.peek().clone();
        let found = if self.at_eof() {
            "end of input".to_string()
        } else if t.kind == TokenKind::Newline {
            "end of line".to_string()
        } else {
            format!("`{}`", t.lexeme)
        };
        let code = if self.at_eof() && what == "`}`" { codes::UNBALANCED } else { codes::SYNTAX };
        self.error(code, t.span, format!("expected {what}, found {found}"));
        Bail
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Span> {
        if self.peek().is_punct(p) {
            Ok(self.bump().span)
        } else {
            Err(self.expected(&format!("`{p}`")))
        }
    }

    /// Skips to the end of the current line, stepping over balanced braces.
    /// Leaves a closing `}` that belongs to an enclosing block in place.
    fn recover_line(&mut self) {
        let mut depth = 0usize;
        while !self.at_eof() {
            let t = self.peek();
            if t.kind == TokenKind::Newline && depth == 0 {
                return;
            }
            if t.is_punct("{") {
                depth += 1;
            } else if t.is_punct("}") {
                if depth == 0 {
                    return;
                }
                depth -= 1;
            }
            self.pos += 1;
        }
    }

    // -- top level -------------------------------------------------------------

    fn document(&mut self) -> Document {
        let mut items = Vec::new();
        loop {
            self.skip_newlines();
            if self.at_eof() {
                break;
            }
            let t = self.peek().clone();
            match t.kind {
                TokenKind::Comment => {
                    let inline = self.comment_is_inline();
                    self.bump();
                    items.push(Item::Comment(Comment { text: t.lexeme, inline }));
                }
                TokenKind::Keyword
                    if matches!(t.lexeme.as_str(), "StrFrag" | "RolesFrag" | "RoleFrag") =>
                {
                    match self.fragment_def() {
                        Ok(f) => items.push(Item::Fragment(f)),
                        Err(Bail) => self.recover_top_level(),
                    }
                }
                TokenKind::Identifier | TokenKind::AllCapsIdentifier | TokenKind::RoleMarker => match self.context_def() {
                    Ok(c) => items.push(Item::Context(c)),
                    Err(Bail) => self.recover_top_level(),
                },
                TokenKind::Punctuation if t.lexeme == "}" => {
                    self.error(codes::UNBALANCED, t.span, "unmatched `}`");
                    self.bump();
                }
                _ => {
                    self.error(
                        codes::SYNTAX,
                        t.span,
                        format!("expected a context or fragment definition, found `{}`", t.lexeme),
                    );
                    self.recover_top_level();
                }
            }
        }
        Document { items }
    }

    /// Skips to the start of the next line that can begin a definition.
    fn recover_top_level(&mut self) {
        let mut depth = 0usize;
        while !self.at_eof() {
            let t = self.peek().clone();
            if t.is_punct("{") {
                depth += 1;
            } else if t.is_punct("}") {
                if depth == 0 {
                    self.pos += 1;
                    return;
                }
                depth -= 1;
                if depth == 0 {
                    self.pos += 1;
                    return;
                }
            } else if t.kind == TokenKind::Newline && depth == 0 {
                let next = self.peek_nth(1);
                let starts_def = next.span.col == 1
                    && matches!(
                        next.kind,
                        TokenKind::Identifier | TokenKind::AllCapsIdentifier | TokenKind::Keyword
                    );
                if starts_def {
                    self.pos += 1;
                    return;
                }
            }
            self.pos += 1;
        }
    }

    fn comment_is_inline(&self) -> bool {
        self.pos > 0 && self.tokens[self.pos - 1].kind != TokenKind::Newline
    }

    fn comment_block(&mut self) -> Block {
        let inline = self.comment_is_inline();
        let t = self.bump();
        Block::new(BlockKind::Comment(Comment { text: t.lexeme, inline }), t.span)
    }

    fn ident(&mut self, what: &str) -> PResult<Ident> {
        let t = self.peek().clone();
        if matches!(t.kind, TokenKind::Identifier | TokenKind::AllCapsIdentifier) {
            self.bump();
            Ok(Ident::new(t.lexeme, t.span))
        } else {
            Err(self.expected(what))
        }
    }

    fn context_def(&mut self) -> PResult<ContextDef> {
        let t = self.peek().clone();
        if t.kind == TokenKind::RoleMarker {
            // a one-letter context name such as `A: {` lexes as a role marker
            self.bump();
            let name = Ident::new(&t.lexeme[..1], Span::new(t.span.start, t.span.start + 1, t.span.line, t.span.col));
            let open = self.expect_punct("{")?;
            let body = self.blocks(false);
            let close = self.close_brace(open)?;
            return Ok(ContextDef { span: t.span.to(close), name, params: Vec::new(), body });
        }
        let name = self.ident("a context name")?;
        let params = self.opt_params()?;
        self.expect_punct(":")?;
        let open = self.expect_punct("{")?;
        let body = self.blocks(false);
        let close = self.close_brace(open)?;
        Ok(ContextDef { span: name.span.to(close), name, params, body })
    }

    fn fragment_def(&mut self) -> PResult<FragmentDef> {
        let kw = self.bump();
        let kind = if kw.lexeme == "StrFrag" { FragKind::Str } else { FragKind::Roles };
        let name = self.ident("a fragment name")?;
        let params = self.opt_params()?;
        self.expect_punct(":")?;
        let open = self.expect_punct("{")?;
        let body = self.blocks(kind == FragKind::Str);
        let close = self.close_brace(open)?;
        Ok(FragmentDef { kind, span: kw.span.to(close), name, params, body })
    }

    fn close_brace(&mut self, open: Span) -> PResult<Span> {
        if self.peek().is_punct("}") {
            return Ok(self.bump().span);
        }
        if self.at_eof() {
            // only the innermost unclosed brace is worth reporting
            if !self.unclosed_reported {
                self.unclosed_reported = true;
                self.error(codes::UNBALANCED, open, "unclosed `{`");
            }
        } else {
            self.expected("`}`");
        }
        Err(Bail)
    }

    fn opt_params(&mut self) -> PResult<Vec<Param>> {
        let mut params = Vec::new();
        if !self.eat_punct("[") {
            return Ok(params);
        }
        self.skip_newlines();
        if self.eat_punct("]") {
            return Ok(params);
        }
        loop {
            self.skip_newlines();
            let t = self.peek().clone();
            match t.kind {
                TokenKind::TimeRef => {
                    self.bump();
                    params.push(Param::Time(self.time_chain(t)?));
                }
                TokenKind::Identifier | TokenKind::AllCapsIdentifier => {
                    self.bump();
                    params.push(Param::Plain(Ident::new(t.lexeme, t.span)));
                }
                _ => return Err(self.expected("a parameter")),
            }
            self.skip_newlines();
            if self.eat_punct(",") {
                continue;
            }
            self.expect_punct("]")?;
            return Ok(params);
        }
    }

    // -- blocks ----------------------------------------------------------------

    /// Parses blocks up to (not including) the closing `}` or end of input.
    fn blocks(&mut self, in_role: bool) -> Vec<Block> {
        let mut out = Vec::new();
        loop {
            self.skip_newlines();
            if self.at_eof() || self.peek().is_punct("}") {
                return out;
            }
            if self.peek().kind == TokenKind::Comment {
                out.push(self.comment_block());
                continue;
            }
            let start = self.pos;
            match self.block(in_role) {
                Ok(b) => out.push(b),
                Err(Bail) => {
                    self.recover_line();
                    if self.pos == start {
                        // a stray token that recovery refuses to consume
                        self.pos += 1;
                    }
                }
            }
        }
    }

    fn braced_body(&mut self, in_role: bool) -> PResult<(Vec<Block>, Span)> {
        let open = self.expect_punct("{")?;
        let body = self.blocks(in_role);
        let close = self.close_brace(open)?;
        Ok((body, close))
    }

    fn block(&mut self, in_role: bool) -> PResult<Block> {
        let t = self.peek().clone();
        match t.kind {
            TokenKind::RoleMarker => self.role_message(in_role),
            TokenKind::Keyword => match t.lexeme.as_str() {
                "ForEach" => self.for_each(in_role),
                "If" => self.if_chain(in_role),
                "Switch" => self.switch(in_role),
                "Mark" => self.mark(in_role),
                "PromptEndsHere" => self.prompt_ends_here(),
                "Name" => self.name_def(),
                "Frag" => self.frag_invoke(),
                "break" => {
                    self.bump();
                    Ok(Block::new(BlockKind::Break, t.span))
                }
                "continue" => {
                    self.bump();
                    Ok(Block::new(BlockKind::Continue, t.span))
                }
                "ElseIf" | "Else" => {
                    self.error(codes::SYNTAX, t.span, format!("`{}` without a preceding `If`", t.lexeme));
                    Err(Bail)
                }
                "Case" | "Default" => {
                    self.error(codes::SYNTAX, t.span, format!("`{}` outside of a `Switch`", t.lexeme));
                    Err(Bail)
                }
                "StrFrag" | "RolesFrag" | "RoleFrag" => {
                    self.error(
                        codes::SYNTAX,
                        t.span,
                        "fragment definitions are only allowed at the top level of a file",
                    );
                    Err(Bail)
                }
                _ => {
                    self.error(codes::SYNTAX, t.span, format!("unexpected keyword `{}`", t.lexeme));
                    Err(Bail)
                }
            },
            _ => {
                let e = self.content_element()?;
                let span = e.span;
                Ok(Block::new(BlockKind::Element(e), span))
            }
        }
    }

    fn role_message(&mut self, in_role: bool) -> PResult<Block> {
        let marker = self.bump();
        let role = Role::from_letter(&marker.lexeme[..1]).expect("lexer only emits SUATN markers");
        if in_role {
            self.error(
                codes::NESTED_ROLE,
                marker.span,
                format!("role message `{}` may not appear inside another role message", marker.lexeme),
            );
        }
        if self.peek().is_punct("{") {
            let (body, close) = self.braced_body(true)?;
            let msg = RoleMessage { role, single_line: false, body };
            return Ok(Block::new(BlockKind::Role(msg), marker.span.to(close)));
        }
        if self.at_line_end() {
            self.error(codes::SYNTAX, marker.span, "expected content after role marker");
            return Err(Bail);
        }
        let t = self.peek().clone();
        let is_ctrl = t.kind == TokenKind::Keyword
            && matches!(
                t.lexeme.as_str(),
                "ForEach" | "If" | "ElseIf" | "Else" | "Switch" | "Mark" | "PromptEndsHere"
            );
        let inner = if is_ctrl {
            self.error(
                codes::SINGLELINE_CTRL,
                t.span,
                format!("`{}` is not allowed in a single-line role message; use the braced form", t.lexeme),
            );
            self.block(true)?
        } else {
            let b = self.block(true)?;
            let permitted = matches!(
                &b.kind,
                BlockKind::Element(Expr {
                    kind: ExprKind::Var(_) | ExprKind::Template { .. } | ExprKind::Call { .. },
                    ..
                })
            );
            if !permitted {
                self.error(
                    codes::SINGLELINE_ELEM,
                    b.span,
                    "a single-line role message holds exactly one context variable, template, or function call",
                );
            }
            b
        };
        let span = marker.span.to(inner.span);
        let msg = RoleMessage { role, single_line: true, body: vec![inner] };
        Ok(Block::new(BlockKind::Role(msg), span))
    }

    fn binder(&mut self) -> PResult<(String, bool, Span)> {
        let t = self.peek().clone();
        match t.kind {
            TokenKind::TimeRef if t.lexeme[1..].chars().all(|c| c.is_ascii_alphabetic() || c == '_') => {
                self.bump();
                Ok((t.lexeme[1..].to_string(), true, t.span))
            }
            TokenKind::Identifier | TokenKind::AllCapsIdentifier => {
                self.bump();
                Ok((t.lexeme, false, t.span))
            }
            _ => Err(self.expected("a loop variable")),
        }
    }

    fn for_each(&mut self, in_role: bool) -> PResult<Block> {
        let kw = self.bump();
        self.expect_punct("(")?;
        let (name, at, span) = self.binder()?;
        self.expect_punct(":")?;
        let iterable = self.expr()?;
        self.expect_punct(")")?;
        let time = at || mentions_time_range(&iterable);
        let (body, close) = self.braced_body(in_role)?;
        let binder = Binder { name, time, span };
        Ok(Block::new(BlockKind::ForEach(ForEach { binder, iterable, body }), kw.span.to(close)))
    }

    fn condition(&mut self) -> PResult<Expr> {
        let e = self.expr()?;
        Ok(mark_substep_atoms(e))
    }

    fn if_chain(&mut self, in_role: bool) -> PResult<Block> {
        let kw = self.bump();
        let mut branches = Vec::new();
        let condition = self.condition()?;
        let (body, mut close) = self.braced_body(in_role)?;
        branches.push(Branch { span: kw.span.to(close), condition, body });
        let mut else_body = None;
        loop {
            let save = self.pos;
            self.skip_newlines();
            let t = self.peek().clone();
            if t.is_keyword("ElseIf") {
                self.bump();
                let condition = self.condition()?;
                let (body, c) = self.braced_body(in_role)?;
                close = c;
                branches.push(Branch { span: t.span.to(c), condition, body });
            } else if t.is_keyword("Else") {
                self.bump();
                let (body, c) = self.braced_body(in_role)?;
                close = c;
                else_body = Some(body);
                break;
            } else {
                self.pos = save;
                break;
            }
        }
        Ok(Block::new(BlockKind::If(IfChain { branches, else_body }), kw.span.to(close)))
    }

    fn switch(&mut self, in_role: bool) -> PResult<Block> {
        let kw = self.bump();
        let scrutinee = self.expr()?;
        let open = self.expect_punct("{")?;
        let mut cases: Vec<Case> = Vec::new();
        let mut default: Option<Vec<Block>> = None;
        // comments between cases move into the neighbouring case body
        let mut pending: Vec<Block> = Vec::new();
        loop {
            self.skip_newlines();
            if self.peek().kind == TokenKind::Comment {
                let mut c = self.comment_block();
                if let BlockKind::Comment(cm) = &mut c.kind {
                    cm.inline = false;
                }
                pending.push(c);
                continue;
            }
            let t = self.peek().clone();
            if t.is_punct("}") {
                self.bump();
                if let Some(body) = default.as_mut().or(cases.last_mut().map(|c| &mut c.body)) {
                    body.append(&mut pending);
                }
                let kind = BlockKind::Switch(Switch { scrutinee, cases, default });
                return Ok(Block::new(kind, kw.span.to(t.span)));
            }
            if self.at_eof() {
                let _ = self.close_brace(open);
                return Err(Bail);
            }
            if t.is_keyword("Case") {
                self.bump();
                let lt = self.bump();
                let label = match lt.kind {
                    TokenKind::StringLiteral => {
                        CaseLabel::Str(lt.lexeme[1..lt.lexeme.len() - 1].to_string())
                    }
                    TokenKind::Identifier | TokenKind::AllCapsIdentifier => CaseLabel::Ident(lt.lexeme),
                    TokenKind::Number => CaseLabel::Int(self.int_value(&lt)?),
                    _ => {
                        self.pos -= 1;
                        return Err(self.expected("a case label"));
                    }
                };
                let (mut body, close) = self.braced_body(in_role)?;
                body.splice(0..0, pending.drain(..));
                cases.push(Case { label, body, span: t.span.to(close) });
            } else if t.is_keyword("Default") {
                self.bump();
                let (mut body, _) = self.braced_body(in_role)?;
                body.splice(0..0, pending.drain(..));
                default = Some(body);
            } else {
                return Err(self.expected("`Case`, `Default`, or `}`"));
            }
        }
    }

    fn mark(&mut self, in_role: bool) -> PResult<Block> {
        let kw = self.bump();
        let t = self.peek().clone();
        if t.kind != TokenKind::Number {
            return Err(self.expected("a mark number"));
        }
        self.bump();
        let number = t.lexeme.parse::<u64>().map_err(|_| {
            self.error(codes::SYNTAX, t.span, "mark number out of range");
            Bail
        })?;
        let (body, close) = self.braced_body(in_role)?;
        Ok(Block::new(BlockKind::Mark(Mark { number, body }), kw.span.to(close)))
    }

    fn prompt_ends_here(&mut self) -> PResult<Block> {
        let kw = self.bump();
        if !self.peek().is_keyword("when") {
            return Err(self.expected("`when`"));
        }
        self.bump();
        let condition = self.condition()?;
        let span = kw.span.to(condition.span);
        Ok(Block::new(BlockKind::PromptEndsHere { condition }, span))
    }

    fn name_def(&mut self) -> PResult<Block> {
        let kw = self.bump();
        let name = self.ident("a name")?;
        self.expect_punct(":=")?;
        self.skip_newlines();
        if self.peek().is_punct("[") {
            let open = self.bump();
            self.skip_newlines();
            let item = self.expr()?;
            self.skip_newlines();
            if !self.peek().is_keyword("for") {
                return Err(self.expected("`for`"));
            }
            self.bump();
            let (bname, at, bspan) = self.binder()?;
            if !self.peek().is_keyword("in") {
                return Err(self.expected("`in`"));
            }
            self.bump();
            let iterable = self.expr()?;
            self.skip_newlines();
            let close = self.expect_punct("]")?;
            let time = at || mentions_time_range(&iterable);
            let binder = Binder { name: bname, time, span: bspan };
            let value = NameValue::Comprehension { item, binder, iterable };
            let _ = open;
            return Ok(Block::new(BlockKind::Name(NameDef { name, value }), kw.span.to(close)));
        }
        let e = self.expr()?;
        let span = kw.span.to(e.span);
        Ok(Block::new(BlockKind::Name(NameDef { name, value: NameValue::Expr(e) }), span))
    }

    fn frag_invoke(&mut self) -> PResult<Block> {
        let kw = self.bump();
        let name = self.ident("a fragment name")?;
        let mut end = name.span;
        let mut args = Vec::new();
        if self.peek().is_punct("[") {
            let (a, close) = self.expr_list("[", "]")?;
            args = a;
            end = close;
        }
        Ok(Block::new(BlockKind::Frag(FragInvoke { name, args }), kw.span.to(end)))
    }

    // -- expressions ---------------------------------------------------------------

    /// A content element: context variable, template, function call, name
    /// reference, or literal.
    fn content_element(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        match t.kind {
            TokenKind::AllCapsIdentifier => {
                self.bump();
                let args = if self.peek().is_punct("(") {
                    let (args, close) = self.expr_list("(", ")")?;
                    let span = t.span.to(close);
                    return Ok(Expr::new(ExprKind::Template { name: t.lexeme, args: Some(args) }, span));
                } else {
                    None
                };
                Ok(Expr::new(ExprKind::Template { name: t.lexeme, args }, t.span))
            }
            TokenKind::Identifier
                if NAMESPACES.contains(&t.lexeme.as_str())
                    || self.peek_nth(1).is_punct("(") =>
            {
                self.postfix()
            }
            TokenKind::NameRef | TokenKind::StringLiteral | TokenKind::InlineLiteral => self.postfix(),
            TokenKind::Identifier => {
                self.error(
                    codes::SYNTAX,
                    t.span,
                    format!(
                        "expected a content element, found identifier `{}`; context variables start with env, sys, or resp",
                        t.lexeme
                    ),
                );
                Err(Bail)
            }
            _ => Err(self.expected("a content element")),
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        let t = self.peek();
        if t.kind != TokenKind::Operator {
            return None;
        }
        Some(match t.lexeme.as_str() {
            "|" | "||" => BinOp::Or,
            "&" | "&&" => BinOp::And,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            ">" => BinOp::Gt,
            "<=" => BinOp::Le,
            ">=" => BinOp::Ge,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            _ => return None,
        })
    }

    /// Precedence climbing; all binary operators are left associative.
    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            if op.precedence() < min_prec {
                break;
            }
            let t = self.bump();
            if matches!(op, BinOp::Le | BinOp::Ge) {
                self.diags.push(Diagnostic::info(
                    codes::ORDER_OP,
                    t.span,
                    format!("`{}` is accepted as an extension to the core comparison operators", t.lexeme),
                ));
            }
            let rhs = self.binary(op.precedence() + 1)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr::new(ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.peek().is_op("-") {
            let t = self.bump();
            let operand = self.unary()?;
            let span = t.span.to(operand.span);
            return Ok(Expr::new(ExprKind::Neg { operand: Box::new(operand) }, span));
        }
        self.postfix()
    }

    fn int_value(&mut self, t: &Token) -> PResult<i64> {
        t.lexeme.parse::<i64>().map_err(|_| {
            self.error(codes::SYNTAX, t.span, "integer literal out of range");
            Bail
        })
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        match t.kind {
            TokenKind::Number => {
                self.bump();
                let value = self.int_value(&t)?;
                Ok(Expr::new(ExprKind::Int { value }, t.span))
            }
            TokenKind::StringLiteral => {
                self.bump();
                let raw = t.lexeme[1..t.lexeme.len() - 1].to_string();
                Ok(Expr::new(ExprKind::Str { raw }, t.span))
            }
            TokenKind::InlineLiteral => {
                self.bump();
                let raw = t.lexeme[2..t.lexeme.len() - 2].to_string();
                Ok(Expr::new(ExprKind::Inline { raw }, t.span))
            }
            TokenKind::TimeRef => {
                self.bump();
                let tr = self.time_chain(t)?;
                let span = tr.span;
                Ok(Expr::new(ExprKind::Time(tr), span))
            }
            TokenKind::NameRef => {
                self.bump();
                let indices = self.opt_indices()?;
                let fields = self.segments()?;
                let span = t.span.to(self.prev_span());
                let nr = NameRef { name: t.lexeme[1..].to_string(), indices, fields, binding: None };
                Ok(Expr::new(ExprKind::NameRef(nr), span))
            }
            TokenKind::Identifier | TokenKind::AllCapsIdentifier => {
                self.bump();
                if self.peek().is_punct("(") {
                    let (args, close) = self.expr_list("(", ")")?;
                    if t.kind == TokenKind::AllCapsIdentifier {
                        let kind = ExprKind::Template { name: t.lexeme, args: Some(args) };
                        return Ok(Expr::new(kind, t.span.to(close)));
                    }
                    let indices = self.opt_indices()?;
                    let span = t.span.to(self.prev_span());
                    return Ok(Expr::new(ExprKind::Call { name: t.lexeme, args, indices }, span));
                }
                if let Some(namespace) = Namespace::parse(&t.lexeme) {
                    if self.peek().is_punct(".") || (self.peek().is_punct("[") && self.adjacent()) {
                        return self.context_var(namespace, t.span);
                    }
                }
                Ok(Expr::new(ExprKind::Ident { name: t.lexeme }, t.span))
            }
            TokenKind::Punctuation if t.lexeme == "(" => {
                self.bump();
                self.skip_newlines();
                let mut inner = self.expr()?;
                self.skip_newlines();
                let close = self.expect_punct(")")?;
                inner.span = t.span.to(close);
                Ok(inner)
            }
            _ => Err(self.expected("an expression")),
        }
    }

    fn context_var(&mut self, namespace: Namespace, start: Span) -> PResult<Expr> {
        let mut agent = None;
        if self.peek().is_punct("[") {
            self.bump();
            self.skip_newlines();
            agent = Some(Box::new(self.expr()?));
            self.skip_newlines();
            self.expect_punct("]")?;
        }
        let path = self.segments()?;
        if path.is_empty() {
            return Err(self.expected("`.` and a path segment"));
        }
        let span = start.to(self.prev_span());
        Ok(Expr::new(ExprKind::Var(ContextVar { namespace, agent, path }), span))
    }

    /// `.name[indices]` repeated.
    fn segments(&mut self) -> PResult<Vec<Segment>> {
        let mut out = Vec::new();
        while self.peek().is_punct(".") && self.adjacent() {
            self.bump();
            let t = self.peek().clone();
            let name = match t.kind {
                TokenKind::Identifier | TokenKind::AllCapsIdentifier | TokenKind::Keyword => t.lexeme,
                _ => return Err(self.expected("a field name")),
            };
            self.bump();
            let indices = self.opt_indices()?;
            out.push(Segment { name, indices });
        }
        Ok(out)
    }

    fn opt_indices(&mut self) -> PResult<Vec<Expr>> {
        if self.peek().is_punct("[") && !self.at_newline() {
            Ok(self.expr_list("[", "]")?.0)
        } else {
            Ok(Vec::new())
        }
    }

    fn expr_list(&mut self, open: &str, close: &str) -> PResult<(Vec<Expr>, Span)> {
        self.expect_punct(open)?;
        let mut out = Vec::new();
        self.skip_trivia();
        if self.peek().is_punct(close) {
            return Ok((out, self.bump().span));
        }
        loop {
            self.skip_trivia();
            out.push(self.expr()?);
            self.skip_trivia();
            if self.eat_punct(",") {
                continue;
            }
            let span = self.expect_punct(close)?;
            return Ok((out, span));
        }
    }

    /// Consumes `.i`, `.0`, `.*`, `.substeps` continuations written without spaces.
    fn time_chain(&mut self, head: Token) -> PResult<TimeRef> {
        let base = head.lexeme[1..].to_string();
        let mut chain = Vec::new();
        let mut span = head.span;
        while self.peek().is_punct(".") && self.adjacent() {
            let next = self.peek_nth(1).clone();
            if next.span.start != self.peek().span.end {
                break;
            }
            let step = match next.kind {
                TokenKind::Identifier | TokenKind::AllCapsIdentifier if next.lexeme == "substeps" => {
                    Substep::Count
                }
                TokenKind::Identifier | TokenKind::AllCapsIdentifier => Substep::Var(next.lexeme.clone()),
                TokenKind::Number => match next.lexeme.parse::<u64>() {
                    Ok(n) => Substep::Index(n),
                    Err(_) => {
                        self.error(codes::SYNTAX, next.span, "sub-step index out of range");
                        return Err(Bail);
                    }
                },
                TokenKind::Operator if next.lexeme == "*" => Substep::Star,
                _ => break,
            };
            self.bump();
            self.bump();
            span = span.to(next.span);
            let done = step == Substep::Count;
            chain.push(step);
            if done {
                break;
            }
        }
        Ok(TimeRef { base, chain, span })
    }
}

/// True when `iterable` is a `range(...)` call whose bounds mention a time reference.
pub fn mentions_time_range(iterable: &Expr) -> bool {
    match &iterable.kind {
        ExprKind::Call { name, args, .. } if name == "range" => {
            let mut found = false;
            for a in args {
                walk_expr(a, &mut |e| {
                    if matches!(e.kind, ExprKind::Time(_)) {
                        found = true;
                    }
                });
            }
            found
        }
        _ => false,
    }
}

/// Rewrites bare `@X.0` atoms in boolean position into `AtSubstepZero`.
pub fn mark_substep_atoms(e: Expr) -> Expr {
    let Expr { kind, span } = e;
    let kind = match kind {
        ExprKind::Time(t) if matches!(t.chain.last(), Some(Substep::Index(0))) => {
            ExprKind::AtSubstepZero(t)
        }
        ExprKind::Binary { op, lhs, rhs } if op.is_logical() => ExprKind::Binary {
            op,
            lhs: Box::new(mark_substep_atoms(*lhs)),
            rhs: Box::new(mark_substep_atoms(*rhs)),
        },
        other => other,
    };
    Expr { kind, span }
}
