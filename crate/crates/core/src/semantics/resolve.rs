use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::diag::{codes, Diagnostic, Span};
use crate::syntax::ast::*;

/// Fragment invocations nested deeper than this are reported as a cycle.
pub const MAX_FRAGMENT_DEPTH: usize = 64;

/// A context definition with every fragment invocation replaced by the
/// instantiated fragment body and every `$name` reference annotated with
/// the span of its definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResolvedContext {
    pub context: ContextDef,
}

impl ResolvedContext {
    pub fn name(&self) -> &str {
        &self.context.name.name
    }

    pub fn body(&self) -> &[Block] {
        &self.context.body
    }

    pub fn time_levels(&self) -> Vec<String> {
        self.context.time_levels()
    }

    /// A single-context document, for re-validation or formatting.
    pub fn to_document(&self) -> Document {
        Document { items: vec![Item::Context(self.context.clone())] }
    }
}

pub fn resolve(doc: &Document, context_name: &str) -> (Option<ResolvedContext>, Vec<Diagnostic>) {
    let Some(ctx) = doc.context(context_name) else {
        let known: Vec<&str> = doc.contexts().map(|c| c.name.name.as_str()).collect();
        let msg = if known.is_empty() {
            format!("no context named `{context_name}`; the document defines none")
        } else {
            format!("no context named `{context_name}`; available: {}", known.join(", "))
        };
        return (None, vec![Diagnostic::error(codes::NO_CONTEXT, Span::default(), msg)]);
    };
    let mut taken = BTreeSet::new();
    collect_names(&ctx.body, &mut taken);
    let mut r = Resolver { doc, diags: Vec::new(), taken, counter: 0 };
    let mut stack = Vec::new();
    let mut body = r.blocks(&ctx.body, &mut stack);
    annotate_names(&mut body, &mut Vec::new());
    let context = ContextDef { body, ..ctx.clone() };
    (Some(ResolvedContext { context }), r.diags)
}

/// Resolves the first context of the document.
pub fn resolve_first(doc: &Document) -> (Option<ResolvedContext>, Vec<Diagnostic>) {
    match doc.contexts().next() {
        Some(c) => resolve(doc, &c.name.name.clone()),
        None => resolve(doc, ""),
    }
}

struct Resolver<'d> {
    doc: &'d Document,
    diags: Vec<Diagnostic>,
    /// `$names` already in use in the context being resolved.
    taken: BTreeSet<String>,
    counter: usize,
}

impl<'d> Resolver<'d> {
    fn blocks(&mut self, blocks: &[Block], stack: &mut Vec<String>) -> Vec<Block> {
        let mut out = Vec::with_capacity(blocks.len());
        for b in blocks {
            if let BlockKind::Frag(inv) = &b.kind {
                if let Some(body) = self.instantiate(inv, b.span, stack) {
                    stack.push(inv.name.name.clone());
                    out.extend(self.blocks(&body, stack));
                    stack.pop();
                }
                continue;
            }
            let mut b = b.clone();
            for list in child_lists_mut(&mut b) {
                let resolved = self.blocks(list, stack);
                *list = resolved;
            }
            out.push(b);
        }
        out
    }

    fn instantiate(&mut self, inv: &FragInvoke, span: Span, stack: &[String]) -> Option<Vec<Block>> {
        let name = &inv.name.name;
        let Some(def) = self.doc.fragment(name) else {
            let msg = format!("unknown fragment `{name}`");
            self.diags.push(Diagnostic::error(codes::FRAG_UNKNOWN, inv.name.span, msg));
            return None;
        };
        if stack.contains(name) {
            let mut chain: Vec<&str> = stack.iter().map(String::as_str).collect();
            chain.push(name);
            let msg = format!("fragment cycle: {}", chain.join(" -> "));
            self.diags.push(Diagnostic::error(codes::FRAG_CYCLE, span, msg));
            return None;
        }
        if stack.len() >= MAX_FRAGMENT_DEPTH {
            let msg = format!("fragment invocations nest deeper than {MAX_FRAGMENT_DEPTH}");
            self.diags.push(Diagnostic::error(codes::FRAG_CYCLE, span, msg));
            return None;
        }
        if def.params.len() != inv.args.len() {
            let msg = format!(
                "fragment `{name}` takes {} argument(s) but {} were given",
                def.params.len(),
                inv.args.len()
            );
            self.diags.push(Diagnostic::error(codes::FRAG_ARITY, span, msg));
            return None;
        }

        let mut body = def.body.clone();
        let mut free = BTreeSet::new();
        let mut arg_names = BTreeSet::new();
        for a in &inv.args {
            free_idents(a, &mut free);
            walk_expr(a, &mut |e| {
                if let ExprKind::NameRef(n) = &e.kind {
                    arg_names.insert(n.name.clone());
                }
            });
        }
        self.rename_binders(&mut body, &free);
        self.rename_names(&mut body, &arg_names);

        let params: BTreeMap<String, &Expr> =
            def.params.iter().map(|p| p.name().to_string()).zip(&inv.args).collect();
        let mut subst = Subst { params, shadowed: Vec::new(), errors: Vec::new() };
        subst.blocks(&mut body);
        for (span, msg) in subst.errors {
            self.diags.push(Diagnostic::error(codes::FRAG_SUBST, span, msg));
        }
        Some(body)
    }

    fn fresh(&mut self, base: &str, avoid: &BTreeSet<String>) -> String {
        loop {
            self.counter += 1;
            let candidate = format!("{base}_{}", self.counter);
            if !avoid.contains(&candidate) && !self.taken.contains(&candidate) {
                return candidate;
            }
        }
    }

    /// Renames loop and comprehension binders that would capture a free
    /// identifier of the arguments.
    fn rename_binders(&mut self, blocks: &mut [Block], free: &BTreeSet<String>) {
        for b in blocks.iter_mut() {
            match &mut b.kind {
                BlockKind::ForEach(f) if free.contains(&f.binder.name) => {
                    let new = self.fresh(&f.binder.name, free);
                    let old = std::mem::replace(&mut f.binder.name, new.clone());
                    rename_in_blocks(&mut f.body, &old, &new);
                }
                BlockKind::Name(NameDef { value: NameValue::Comprehension { item, binder, .. }, .. })
                    if free.contains(&binder.name) =>
                {
                    let new = self.fresh(&binder.name, free);
                    let old = std::mem::replace(&mut binder.name, new.clone());
                    rename_ident(item, &old, &new);
                }
                _ => {}
            }
            for list in child_lists_mut(b) {
                self.rename_binders(list, free);
            }
        }
    }

    /// Renames `$names` defined in a fragment body that collide with names of
    /// the invoking context or of the arguments.
    fn rename_names(&mut self, body: &mut [Block], arg_names: &BTreeSet<String>) {
        let mut defined = BTreeSet::new();
        walk_blocks(body, &mut |b| {
            if let BlockKind::Name(n) = &b.kind {
                defined.insert(n.name.name.clone());
            }
        });
        let mut avoid = self.taken.clone();
        avoid.extend(arg_names.iter().cloned());
        for old in defined {
            if !avoid.contains(&old) {
                self.taken.insert(old);
                continue;
            }
            let new = self.fresh(&old, &avoid);
            self.taken.insert(new.clone());
            rename_name_refs(body, &old, &new);
        }
    }
}

fn collect_names(blocks: &[Block], out: &mut BTreeSet<String>) {
    walk_blocks(blocks, &mut |b| {
        if let BlockKind::Name(n) = &b.kind {
            out.insert(n.name.name.clone());
        }
        for e in block_exprs(b) {
            walk_expr(e, &mut |e| {
                if let ExprKind::NameRef(n) = &e.kind {
                    out.insert(n.name.clone());
                }
            });
        }
    });
}

/// Identifiers, time-reference bases and sub-step variables occurring in `e`.
pub(crate) fn free_idents(e: &Expr, out: &mut BTreeSet<String>) {
    walk_expr(e, &mut |e| match &e.kind {
        ExprKind::Ident { name } => {
            out.insert(name.clone());
        }
        ExprKind::Time(t) | ExprKind::AtSubstepZero(t) => {
            out.insert(t.base.clone());
            for s in &t.chain {
                if let Substep::Var(v) = s {
                    out.insert(v.clone());
                }
            }
        }
        _ => {}
    });
}

fn rename_time(t: &mut TimeRef, old: &str, new: &str) {
    if t.base == old {
        t.base = new.to_string();
    }
    for s in &mut t.chain {
        if matches!(s, Substep::Var(v) if v == old) {
            *s = Substep::Var(new.to_string());
        }
    }
}

fn rename_ident(e: &mut Expr, old: &str, new: &str) {
    match &mut e.kind {
        ExprKind::Ident { name } if name == old => *name = new.to_string(),
        ExprKind::Time(t) | ExprKind::AtSubstepZero(t) => rename_time(t, old, new),
        _ => {}
    }
    for s in sub_exprs_mut(e) {
        rename_ident(s, old, new);
    }
}

fn rename_in_blocks(blocks: &mut [Block], old: &str, new: &str) {
    for b in blocks.iter_mut() {
        let stop = match &b.kind {
            BlockKind::ForEach(f) => f.binder.name == old,
            _ => false,
        };
        if let BlockKind::ForEach(f) = &mut b.kind {
            rename_ident(&mut f.iterable, old, new);
            if !stop {
                rename_in_blocks(&mut f.body, old, new);
            }
            continue;
        }
        if let BlockKind::Name(NameDef { value: NameValue::Comprehension { item, binder, iterable }, .. }) =
            &mut b.kind
        {
            rename_ident(iterable, old, new);
            if binder.name != old {
                rename_ident(item, old, new);
            }
            continue;
        }
        for e in block_exprs_mut(b) {
            rename_ident(e, old, new);
        }
        for list in child_lists_mut(b) {
            rename_in_blocks(list, old, new);
        }
    }
}

fn rename_name_refs(blocks: &mut [Block], old: &str, new: &str) {
    for b in blocks.iter_mut() {
        if let BlockKind::Name(n) = &mut b.kind {
            if n.name.name == old {
                n.name.name = new.to_string();
            }
        }
        for e in block_exprs_mut(b) {
            rename_ref_expr(e, old, new);
        }
        for list in child_lists_mut(b) {
            rename_name_refs(list, old, new);
        }
    }
}

fn rename_ref_expr(e: &mut Expr, old: &str, new: &str) {
    if let ExprKind::NameRef(n) = &mut e.kind {
        if n.name == old {
            n.name = new.to_string();
        }
    }
    for s in sub_exprs_mut(e) {
        rename_ref_expr(s, old, new);
    }
}

/// Positional parameter substitution, respecting loop binders that shadow
/// a parameter name.
struct Subst<'a> {
    params: BTreeMap<String, &'a Expr>,
    shadowed: Vec<String>,
    errors: Vec<(Span, String)>,
}

impl<'a> Subst<'a> {
    fn lookup(&self, name: &str) -> Option<&'a Expr> {
        if self.shadowed.iter().any(|s| s == name) {
            return None;
        }
        self.params.get(name).copied()
    }

    fn blocks(&mut self, blocks: &mut [Block]) {
        for b in blocks.iter_mut() {
            match &mut b.kind {
                BlockKind::ForEach(f) => {
                    self.expr(&mut f.iterable);
                    self.shadowed.push(f.binder.name.clone());
                    self.blocks(&mut f.body);
                    self.shadowed.pop();
                    continue;
                }
                BlockKind::Name(NameDef { value: NameValue::Comprehension { item, binder, iterable }, .. }) => {
                    self.expr(iterable);
                    self.shadowed.push(binder.name.clone());
                    self.expr(item);
                    self.shadowed.pop();
                    continue;
                }
                _ => {}
            }
            for e in block_exprs_mut(b) {
                self.expr(e);
            }
            for list in child_lists_mut(b) {
                self.blocks(list);
            }
        }
    }

    fn chain(&mut self, t: &mut TimeRef) {
        for i in 0..t.chain.len() {
            let Substep::Var(v) = &t.chain[i] else { continue };
            let Some(arg) = self.lookup(v) else { continue };
            t.chain[i] = match &arg.kind {
                ExprKind::Int { value } if *value >= 0 => Substep::Index(*value as u64),
                ExprKind::Ident { name } => Substep::Var(name.clone()),
                ExprKind::Time(a) if a.chain.is_empty() => Substep::Var(a.base.clone()),
                _ => {
                    self.errors.push((
                        t.span,
                        format!("cannot substitute `{}` into the sub-step position `.{v}`", crate::syntax::format_expr(arg)),
                    ));
                    continue;
                }
            };
        }
    }

    fn expr(&mut self, e: &mut Expr) {
        match &mut e.kind {
            ExprKind::Ident { name } => {
                if let Some(arg) = self.lookup(name) {
                    *e = arg.clone();
                    return;
                }
            }
            ExprKind::Time(t) | ExprKind::AtSubstepZero(t) => {
                self.chain(t);
                let atom = matches!(e.kind, ExprKind::AtSubstepZero(_));
                let (ExprKind::Time(t) | ExprKind::AtSubstepZero(t)) = &e.kind else { unreachable!() };
                let Some(arg) = self.lookup(&t.base) else { return };
                let merged = match &arg.kind {
                    ExprKind::Time(a) => {
                        let mut chain = a.chain.clone();
                        chain.extend(t.chain.iter().cloned());
                        Some(TimeRef { base: a.base.clone(), chain, span: t.span })
                    }
                    ExprKind::Int { value } if *value >= 0 => {
                        Some(TimeRef { base: value.to_string(), chain: t.chain.clone(), span: t.span })
                    }
                    ExprKind::Ident { name } => {
                        Some(TimeRef { base: name.clone(), chain: t.chain.clone(), span: t.span })
                    }
                    _ if t.chain.is_empty() && !atom => {
                        *e = arg.clone();
                        return;
                    }
                    _ => None,
                };
                match merged {
                    Some(m) if atom => e.kind = ExprKind::AtSubstepZero(m),
                    Some(m) => e.kind = ExprKind::Time(m),
                    None => self.errors.push((
                        e.span,
                        format!(
                            "cannot substitute `{}` for time parameter `@{}` here",
                            crate::syntax::format_expr(arg),
                            t.base
                        ),
                    )),
                }
                return;
            }
            _ => {}
        }
        for s in sub_exprs_mut(e) {
            self.expr(s);
        }
    }
}

/// Fills in `NameRef::binding` with the span of the visible definition.
fn annotate_names(blocks: &mut [Block], frames: &mut Vec<BTreeMap<String, Span>>) {
    frames.push(BTreeMap::new());
    for b in blocks.iter_mut() {
        for e in block_exprs_mut(b) {
            annotate_expr(e, frames);
        }
        if let BlockKind::Name(n) = &b.kind {
            frames.last_mut().unwrap().insert(n.name.name.clone(), n.name.span);
        }
        for list in child_lists_mut(b) {
            annotate_names(list, frames);
        }
    }
    frames.pop();
}

fn annotate_expr(e: &mut Expr, frames: &[BTreeMap<String, Span>]) {
    if let ExprKind::NameRef(n) = &mut e.kind {
        n.binding = frames.iter().rev().find_map(|f| f.get(&n.name).copied());
    }
    for s in sub_exprs_mut(e) {
        annotate_expr(s, frames);
    }
}
