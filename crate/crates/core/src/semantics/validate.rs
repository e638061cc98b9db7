use std::collections::{BTreeMap, BTreeSet};

use crate::diag::{codes, Diagnostic, Span};
use crate::semantics::symbols::build_symbols;
use crate::syntax::ast::*;

#[derive(Debug, Clone, Copy, Default)]
pub struct ValidateOptions {
    /// Also report templates and functions used with inconsistent arities.
    pub strict: bool,
}

/// Checks scoping, role, fragment, naming and loop-control rules.
/// Diagnostics come back in source order.
pub fn validate(doc: &Document) -> Vec<Diagnostic> {
    validate_with(doc, ValidateOptions::default())
}

pub fn validate_with(doc: &Document, opts: ValidateOptions) -> Vec<Diagnostic> {
    let mut v = Validator { doc, diags: Vec::new() };
    v.definitions();
    for item in &doc.items {
        match item {
            Item::Context(c) => v.context(c),
            Item::Fragment(f) => v.fragment(f),
            Item::Comment(_) => {}
        }
    }
    if opts.strict {
        v.arities();
    }
    let mut diags = v.diags;
    diags.sort_by_key(|d| (d.span.start, d.span.end));
    diags
}

struct Validator<'d> {
    doc: &'d Document,
    diags: Vec<Diagnostic>,
}

/// Where a block list sits.
#[derive(Clone, Copy)]
struct Place {
    in_role: bool,
    in_loop: bool,
}

impl<'d> Validator<'d> {
    fn push(&mut self, d: Diagnostic) {
        self.diags.push(d);
    }

    fn definitions(&mut self) {
        let mut seen: BTreeMap<&str, Span> = BTreeMap::new();
        for item in &self.doc.items {
            let (name, what) = match item {
                Item::Context(c) => (&c.name, "context"),
                Item::Fragment(f) => (&f.name, "fragment"),
                Item::Comment(_) => continue,
            };
            if let Some(first) = seen.get(name.name.as_str()) {
                let msg = format!(
                    "`{}` is already defined (line {}); contexts and fragments share one namespace",
                    name.name, first.line
                );
                self.push(Diagnostic::error(codes::DUP_DEF, name.span, msg));
            } else {
                seen.insert(&name.name, name.span);
            }
            if !name.name.starts_with(|c: char| c.is_ascii_uppercase()) {
                let msg = format!("{what} name `{}` should start with an uppercase letter", name.name);
                self.push(Diagnostic::warning(codes::NAMING, name.span, msg));
            }
        }
    }

    fn context(&mut self, c: &ContextDef) {
        self.completion_rules(&c.body);
        self.marks(&c.body);
        let mut scope = Scope::default();
        self.blocks(&c.body, Place { in_role: false, in_loop: false }, &mut scope);
    }

    fn fragment(&mut self, f: &FragmentDef) {
        self.marks(&f.body);
        let mut scope = Scope::default();
        let place = Place { in_role: f.kind == FragKind::Str, in_loop: false };
        self.blocks(&f.body, place, &mut scope);
    }

    /// Rules specific to completion-format (`N:`) prompts.
    fn completion_rules(&mut self, body: &[Block]) {
        let mut n_blocks = Vec::new();
        let mut chat = Vec::new();
        walk_blocks(body, &mut |b| {
            if let BlockKind::Role(r) = &b.kind {
                if r.role == Role::N {
                    n_blocks.push(role_marker_span(b));
                } else {
                    chat.push((r.role, role_marker_span(b)));
                }
            }
        });
        if n_blocks.is_empty() {
            return;
        }
        for span in &n_blocks[1..] {
            self.push(Diagnostic::error(codes::N_MULTI, *span, "exactly one `N:` block may appear per prompt"));
        }
        for (role, span) in chat {
            let msg = format!("chat role `{role}:` may not appear in a completion-format (`N:`) prompt");
            self.push(Diagnostic::error(codes::N_MIXED, span, msg));
        }
        for b in body {
            let allowed = matches!(&b.kind, BlockKind::Role(_) | BlockKind::Comment(_));
            if !allowed {
                self.push(Diagnostic::error(
                    codes::N_TOPLEVEL,
                    b.span,
                    "the top level of a completion prompt may contain only its single `N:` block",
                ));
            }
        }
    }

    fn marks(&mut self, body: &[Block]) {
        let mut seen = BTreeSet::new();
        walk_blocks(body, &mut |b| {
            if let BlockKind::Mark(m) = &b.kind {
                if !seen.insert(m.number) {
                    let msg = format!("mark number {} is used more than once", m.number);
                    self.diags.push(Diagnostic::warning(codes::DUP_MARK, b.span, msg));
                }
            }
        });
    }

    fn blocks(&mut self, blocks: &[Block], place: Place, scope: &mut Scope) {
        scope.frames.push(BTreeMap::new());
        for b in blocks {
            self.block(b, place, scope);
        }
        scope.frames.pop();
    }

    fn block(&mut self, b: &Block, place: Place, scope: &mut Scope) {
        for e in block_exprs(b) {
            self.expr(e, scope);
        }
        match &b.kind {
            BlockKind::Role(r) => {
                if place.in_role {
                    let msg = format!("role message `{}:` may not appear inside another role message", r.role);
                    self.push(Diagnostic::error(codes::NESTED_ROLE, role_marker_span(b), msg));
                }
                self.blocks(&r.body, Place { in_role: true, ..place }, scope);
            }
            BlockKind::ForEach(f) => self.blocks(&f.body, Place { in_loop: true, ..place }, scope),
            BlockKind::Name(n) => {
                if scope.lookup(&n.name.name).is_some() {
                    let msg = format!("`${}` shadows an earlier definition", n.name.name);
                    self.push(Diagnostic::warning(codes::NAME_SHADOW, n.name.span, msg));
                }
                scope.define(&n.name.name, n.name.span);
            }
            BlockKind::Frag(inv) => self.frag_invoke(inv, b.span, place),
            BlockKind::Element(_) if !place.in_role => {
                self.push(Diagnostic::error(
                    codes::TOPLEVEL_CONTENT,
                    b.span,
                    "content elements must appear inside a role message",
                ));
            }
            BlockKind::Break | BlockKind::Continue if !place.in_loop => {
                let kw = if matches!(b.kind, BlockKind::Break) { "break" } else { "continue" };
                self.push(Diagnostic::error(codes::LOOPCTL, b.span, format!("`{kw}` outside of a loop")));
            }
            _ => {
                for list in child_lists(b) {
                    self.blocks(list, place, scope);
                }
            }
        }
    }

    fn frag_invoke(&mut self, inv: &FragInvoke, span: Span, place: Place) {
        let Some(def) = self.doc.fragment(&inv.name.name) else {
            let msg = format!("unknown fragment `{}`", inv.name.name);
            self.push(Diagnostic::error(codes::FRAG_UNKNOWN, inv.name.span, msg));
            return;
        };
        match (def.kind, place.in_role) {
            (FragKind::Str, false) => self.push(Diagnostic::error(
                codes::FRAG_POSITION,
                span,
                format!("string fragment `{}` can only be invoked inside a role message", def.name.name),
            )),
            (FragKind::Roles, true) => self.push(Diagnostic::error(
                codes::FRAG_POSITION,
                span,
                format!("roles fragment `{}` can only be invoked at the top level", def.name.name),
            )),
            _ => {}
        }
        if def.params.len() != inv.args.len() {
            let msg = format!(
                "fragment `{}` takes {} argument(s) but {} were given",
                def.name.name,
                def.params.len(),
                inv.args.len()
            );
            self.push(Diagnostic::error(codes::FRAG_ARITY, span, msg));
        }
    }

    fn expr(&mut self, e: &Expr, scope: &Scope) {
        walk_expr(e, &mut |e| match &e.kind {
            ExprKind::NameRef(n) if scope.lookup(&n.name).is_none() => {
                let msg = format!("`${}` is not defined in this scope", n.name);
                self.diags.push(Diagnostic::error(codes::NAME_UNBOUND, e.span, msg));
            }
            ExprKind::Call { name, .. } if name.starts_with(|c: char| c.is_ascii_uppercase()) => {
                let msg = format!(
                    "function `{name}` should start with a lowercase letter (ALL_CAPS names are templates)"
                );
                self.diags.push(Diagnostic::warning(codes::NAMING, e.span, msg));
            }
            ExprKind::AtSubstepZero(_) => {
                self.diags.push(Diagnostic::info(
                    codes::SUBSTEP_ATOM,
                    e.span,
                    "a bare sub-step reference used as a condition is true when the current sub-step is 0",
                ));
            }
            _ => {}
        });
    }

    fn arities(&mut self) {
        let table = build_symbols(self.doc);
        let mut first_use: BTreeMap<(bool, String), Span> = BTreeMap::new();
        for item in &self.doc.items {
            let body = match item {
                Item::Context(c) => &c.body,
                Item::Fragment(f) => &f.body,
                Item::Comment(_) => continue,
            };
            walk_blocks(body, &mut |b| {
                for e in block_exprs(b) {
                    walk_expr(e, &mut |e| match &e.kind {
                        ExprKind::Template { name, .. } => {
                            first_use.entry((true, name.clone())).or_insert(e.span);
                        }
                        ExprKind::Call { name, .. } => {
                            first_use.entry((false, name.clone())).or_insert(e.span);
                        }
                        _ => {}
                    });
                }
            });
        }
        for ((is_template, name), span) in first_use {
            let set = if is_template { &table.templates } else { &table.functions };
            if let Some(arities) = set.get(&name) {
                if arities.len() > 1 {
                    let list: Vec<String> = arities.iter().map(|a| a.to_string()).collect();
                    let what = if is_template { "template" } else { "function" };
                    let msg = format!("{what} `{name}` is used with different arities: {}", list.join(", "));
                    self.push(Diagnostic::warning(codes::ARITY_VARIES, span, msg));
                }
            }
        }
    }
}

/// Lexical `$name` scope: one frame per block list.
#[derive(Default)]
struct Scope {
    frames: Vec<BTreeMap<String, Span>>,
}

impl Scope {
    fn lookup(&self, name: &str) -> Option<Span> {
        self.frames.iter().rev().find_map(|f| f.get(name).copied())
    }

    fn define(&mut self, name: &str, span: Span) {
        if let Some(f) = self.frames.last_mut() {
            f.insert(name.to_string(), span);
        }
    }
}

/// Span of the `S:`/`U:`/... marker that starts a role block.
pub(crate) fn role_marker_span(b: &Block) -> Span {
    let s = b.span;
    Span::new(s.start, (s.start + 2).min(s.end), s.line, s.col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn codes_of(src: &str) -> Vec<&'static str> {
        let (doc, pd) = parse(src);
        assert!(!crate::diag::has_errors(&pd), "{pd:#?}");
        validate(&doc).into_iter().map(|d| d.code).collect()
    }

    #[test]
    fn completion_prompt_is_clean() {
        let src = "CompletionPrompt[@t]: {\n  N: {\n    TASK_DESCRIPTION\n    env.context[@t]\n    QUESTION\n  }\n}\n";
        assert!(codes_of(src).is_empty());
    }

    #[test]
    fn n_mixed_with_chat_roles() {
        assert_eq!(codes_of("P[@t]: {\n  N: {\n    X\n  }\n  U: env.q[@t]\n}\n"), vec![codes::N_MIXED]);
    }

    #[test]
    fn string_fragment_at_top_level() {
        let src = "StrFrag ToolDescription[tool]: {\n  sys.tool_name[tool]\n}\nP[@T]: {\n  Frag ToolDescription[sys.t]\n}\n";
        assert_eq!(codes_of(src), vec![codes::FRAG_POSITION]);
    }

    #[test]
    fn name_scope_is_lexical() {
        let src = "P[@T]: {\n  U: {\n    $early\n    Name early := env.x\n    $early\n  }\n  A: {\n    $early\n  }\n}\n";
        assert_eq!(codes_of(src), vec![codes::NAME_UNBOUND, codes::NAME_UNBOUND]);
    }

    #[test]
    fn strict_flags_varying_arity() {
        let src = "P: {\n  S: {\n    QUERY(env.a)\n    QUERY\n  }\n}\n";
        let (doc, _) = parse(src);
        assert!(validate(&doc).is_empty());
        let strict = validate_with(&doc, ValidateOptions { strict: true });
        assert_eq!(strict.len(), 1);
        assert_eq!(strict[0].code, codes::ARITY_VARIES);
    }

    #[test]
    fn substep_atom_is_info() {
        let d = codes_of("P[@T]: {\n  PromptEndsHere when @T.0\n}\n");
        assert_eq!(d, vec![codes::SUBSTEP_ATOM]);
    }
}
