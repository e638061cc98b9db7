//! Canonical pretty-printer.
//!
//! Two-space indentation, one statement or content element per line,
//! `&`/`|` connectives, `RolesFrag` for roles fragments, `@`-prefixed time
//! binders, and the minimal parentheses needed to preserve the tree.

use crate::syntax::ast::*;

pub fn format(doc: &Document) -> String {
    let mut p = Printer::default();
    let mut prev_was_def = false;
    for item in &doc.items {
        match item {
            Item::Comment(c) if c.inline => {
                p.comment(c);
                continue;
            }
            _ => {}
        }
        if prev_was_def {
            p.out.push('\n');
        }
        match item {
            Item::Context(c) => {
                let mut head = c.name.name.clone();
                if !c.params.is_empty() {
                    head.push_str(&params(&c.params));
                }
                p.braced(0, &format!("{head}: {{"), &c.body);
                prev_was_def = true;
            }
            Item::Fragment(f) => {
                let head = format!("{} {}{}: {{", f.kind.keyword(), f.name.name, params(&f.params));
                p.braced(0, &head, &f.body);
                prev_was_def = true;
            }
            Item::Comment(c) => {
                p.comment(c);
                prev_was_def = false;
            }
        }
    }
    p.out
}

/// Formats a single block at the given indentation level.
pub fn format_block(block: &Block, indent: usize) -> String {
    let mut p = Printer::default();
    p.block(indent, block);
    p.out
}

/// The canonical text of a block's first line, without indentation or
/// trailing `{`. Used for frame headers and diff reports.
pub fn block_header(block: &Block) -> String {
    match &block.kind {
        BlockKind::Role(r) if r.single_line && r.body.len() == 1 => {
            format!("{}: {}", r.role, format_block(&r.body[0], 0).trim_end())
        }
        BlockKind::Role(r) => format!("{}:", r.role),
        BlockKind::ForEach(f) => format!("ForEach({}: {})", binder(&f.binder), format_expr(&f.iterable)),
        BlockKind::If(chain) => format!("If {}", format_expr(&chain.branches[0].condition)),
        BlockKind::Switch(s) => format!("Switch {}", format_expr(&s.scrutinee)),
        BlockKind::Mark(m) => format!("Mark {}", m.number),
        _ => format_block(block, 0).trim_end().to_string(),
    }
}

fn params(ps: &[Param]) -> String {
    let parts: Vec<String> = ps
        .iter()
        .map(|p| match p {
            Param::Time(t) => time_ref(t),
            Param::Plain(i) => i.name.clone(),
        })
        .collect();
    format!("[{}]", parts.join(", "))
}

fn binder(b: &Binder) -> String {
    if b.time {
        format!("@{}", b.name)
    } else {
        b.name.clone()
    }
}

#[derive(Default)]
struct Printer {
    out: String,
}

impl Printer {
    fn line(&mut self, indent: usize, text: &str) {
        for _ in 0..indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn comment(&mut self, c: &Comment) {
        if c.inline && self.out.ends_with('\n') {
            self.out.pop();
            self.out.push_str("  ");
            self.out.push_str(&c.text);
            self.out.push('\n');
        } else {
            self.out.push_str(&c.text);
            self.out.push('\n');
        }
    }

    fn braced(&mut self, indent: usize, head: &str, body: &[Block]) {
        self.line(indent, head);
        self.blocks(indent + 1, body);
        self.line(indent, "}");
    }

    fn blocks(&mut self, indent: usize, blocks: &[Block]) {
        for b in blocks {
            self.block(indent, b);
        }
    }

    fn block(&mut self, indent: usize, block: &Block) {
        match &block.kind {
            BlockKind::Role(r) => {
                if r.single_line && r.body.len() == 1 {
                    let inner = format_block(&r.body[0], indent);
                    let inner = inner.trim_start();
                    for _ in 0..indent {
                        self.out.push_str("  ");
                    }
                    self.out.push_str(&format!("{}: {}", r.role, inner));
                } else {
                    self.braced(indent, &format!("{}: {{", r.role), &r.body);
                }
            }
            BlockKind::ForEach(f) => {
                let head = format!("ForEach({}: {}) {{", binder(&f.binder), format_expr(&f.iterable));
                self.braced(indent, &head, &f.body);
            }
            BlockKind::If(chain) => {
                for (i, br) in chain.branches.iter().enumerate() {
                    let kw = if i == 0 { "If" } else { "ElseIf" };
                    self.braced(indent, &format!("{kw} {} {{", format_expr(&br.condition)), &br.body);
                }
                if let Some(body) = &chain.else_body {
                    self.braced(indent, "Else {", body);
                }
            }
            BlockKind::Switch(s) => {
                self.line(indent, &format!("Switch {} {{", format_expr(&s.scrutinee)));
                for c in &s.cases {
                    let label = match &c.label {
                        CaseLabel::Str(s) => format!("\"{s}\""),
                        CaseLabel::Ident(i) => i.clone(),
                        CaseLabel::Int(n) => n.to_string(),
                    };
                    self.braced(indent + 1, &format!("Case {label} {{"), &c.body);
                }
                if let Some(body) = &s.default {
                    self.braced(indent + 1, "Default {", body);
                }
                self.line(indent, "}");
            }
            BlockKind::Mark(m) => self.braced(indent, &format!("Mark {} {{", m.number), &m.body),
            BlockKind::PromptEndsHere { condition } => {
                self.line(indent, &format!("PromptEndsHere when {}", format_expr(condition)))
            }
            BlockKind::Name(n) => {
                let value = match &n.value {
                    NameValue::Expr(e) => format_expr(e),
                    NameValue::Comprehension { item, binder: b, iterable } => format!(
                        "[{} for {} in {}]",
                        format_expr(item),
                        binder(b),
                        format_expr(iterable)
                    ),
                };
                self.line(indent, &format!("Name {} := {}", n.name.name, value));
            }
            BlockKind::Frag(f) => {
                let args: Vec<String> = f.args.iter().map(format_expr).collect();
                self.line(indent, &format!("Frag {}[{}]", f.name.name, args.join(", ")));
            }
            BlockKind::Comment(c) => {
                if c.inline && self.out.ends_with('\n') {
                    self.comment(c);
                } else {
                    for _ in 0..indent {
                        self.out.push_str("  ");
                    }
                    self.comment(c);
                }
            }
            BlockKind::Element(e) => self.line(indent, &format_expr(e)),
            BlockKind::Break => self.line(indent, "break"),
            BlockKind::Continue => self.line(indent, "continue"),
        }
    }
}

pub fn time_ref(t: &TimeRef) -> String {
    let mut s = format!("@{}", t.base);
    for step in &t.chain {
        s.push('.');
        s.push_str(&step.to_string());
    }
    s
}

fn list(items: &[Expr]) -> String {
    items.iter().map(format_expr).collect::<Vec<_>>().join(", ")
}

fn indices(idx: &[Expr]) -> String {
    if idx.is_empty() {
        String::new()
    } else {
        format!("[{}]", list(idx))
    }
}

fn segments(out: &mut String, segs: &[Segment]) {
    for seg in segs {
        out.push('.');
        out.push_str(&seg.name);
        out.push_str(&indices(&seg.indices));
    }
}

pub fn format_expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Int { value } => value.to_string(),
        ExprKind::Str { raw } => format!("\"{raw}\""),
        ExprKind::Inline { raw } => format!("{{{{{raw}}}}}"),
        ExprKind::Time(t) | ExprKind::AtSubstepZero(t) => time_ref(t),
        ExprKind::Ident { name } => name.clone(),
        ExprKind::Template { name, args: None } => name.clone(),
        ExprKind::Template { name, args: Some(args) } => format!("{name}({})", list(args)),
        ExprKind::Call { name, args, indices: idx } => format!("{name}({}){}", list(args), indices(idx)),
        ExprKind::Var(v) => {
            let mut s = v.namespace.as_str().to_string();
            if let Some(agent) = &v.agent {
                s.push_str(&format!("[{}]", format_expr(agent)));
            }
            segments(&mut s, &v.path);
            s
        }
        ExprKind::NameRef(n) => {
            let mut s = format!("${}{}", n.name, indices(&n.indices));
            segments(&mut s, &n.fields);
            s
        }
        ExprKind::Neg { operand } => match operand.kind {
            ExprKind::Binary { .. } => format!("-({})", format_expr(operand)),
            _ => format!("-{}", format_expr(operand)),
        },
        ExprKind::Binary { op, lhs, rhs } => {
            let prec = op.precedence();
            let l = operand(lhs, |p| p < prec);
            let r = operand(rhs, |p| p <= prec);
            format!("{l} {} {r}", op.symbol())
        }
    }
}

fn operand(e: &Expr, needs_parens: impl Fn(u8) -> bool) -> String {
    match &e.kind {
        ExprKind::Binary { op, .. } if needs_parens(op.precedence()) => format!("({})", format_expr(e)),
        _ => format_expr(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parser::{parse, parse_expr};

    fn roundtrip(src: &str) -> String {
        let (doc, diags) = parse(src);
        assert!(!crate::diag::has_errors(&diags), "{diags:#?}");
        let out = format(&doc);
        let (again, diags) = parse(&out);
        assert!(!crate::diag::has_errors(&diags), "{out}\n{diags:#?}");
        assert_eq!(doc, again, "formatted:\n{out}");
        out
    }

    #[test]
    fn empty_context() {
        assert_eq!(roundtrip("X[@T]: { }"), "X[@T]: {\n}\n");
    }

    #[test]
    fn inline_comment_stays_on_its_line() {
        let out = roundtrip("P[@T]: {\nS: {\n// own\nINSTRUCTIONS   // beside\n}\n}\n");
        assert!(out.contains("    INSTRUCTIONS  // beside\n"), "{out}");
        assert!(out.contains("    // own\n"), "{out}");
    }

    #[test]
    fn canonical_connectives_and_keywords() {
        let out = roundtrip("RoleFrag F[@t]: {\n}\nP[@T]: {\n  PromptEndsHere when (@T == @t && @T.0)\n}\n");
        assert!(out.starts_with("RolesFrag F[@t]: {\n}\n\n"));
        assert!(out.contains("PromptEndsHere when @T == @t & @T.0\n"), "{out}");
    }

    #[test]
    fn time_binders_get_at_prefix() {
        let out = roundtrip("P[@T]: {\n  ForEach(t: range(1, @T)) {\n    U: env.q[@t]\n  }\n}\n");
        assert!(out.contains("ForEach(@t: range(1, @T)) {"), "{out}");
    }

    #[test]
    fn minimal_parentheses() {
        for (src, want) in [
            ("(a + b) * c", "(a + b) * c"),
            ("a - (b - c)", "a - (b - c)"),
            ("(a - b) - c", "a - b - c"),
            ("a | b & c", "a | b & c"),
            ("(a | b) & c", "(a | b) & c"),
            ("-(a + 1)", "-(a + 1)"),
            ("@t.i-1", "@t.i - 1"),
        ] {
            let (e, d) = parse_expr(src);
            assert!(d.is_empty(), "{src}: {d:?}");
            assert_eq!(format_expr(&e.unwrap()), want);
        }
    }

    #[test]
    fn if_chain_layout() {
        let src = "P[@T]: {\n  If x == a {\n  } ElseIf x == b {\n  }\n  Else {\n    U: env.z\n  }\n}\n";
        let out = roundtrip(src);
        assert_eq!(
            out,
            "P[@T]: {\n  If x == a {\n  }\n  ElseIf x == b {\n  }\n  Else {\n    U: env.z\n  }\n}\n"
        );
    }
}
