use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::diag::{codes, Diagnostic, Span};
use crate::expand::env::EnvironmentDocument;
use crate::expand::value::{Bindings, Closure, Value};
use crate::semantics::resolve::free_idents;
use crate::syntax::ast::*;
use crate::syntax::format::format_expr;

/// Loops and ranges longer than this are cut off with `X-OVERFLOW`.
pub const MAX_ITERATIONS: usize = 1_000_000;

pub fn eval_index(e: &Expr, b: &Bindings, env: &EnvironmentDocument) -> Result<Value, Diagnostic> {
    Eval { env }.index(e, b)
}

pub fn eval_condition(e: &Expr, b: &Bindings, env: &EnvironmentDocument) -> Result<bool, Diagnostic> {
    Eval { env }.condition(e, b)
}

fn unbound(span: Span, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error(codes::UNBOUND_IDX, span, msg)
}

fn overflow(span: Span) -> Diagnostic {
    Diagnostic::error(codes::OVERFLOW, span, "integer overflow in index arithmetic")
}

#[derive(Clone, Copy)]
pub struct Eval<'a> {
    pub env: &'a EnvironmentDocument,
}

impl<'a> Eval<'a> {
    pub fn index(&self, e: &Expr, b: &Bindings) -> Result<Value, Diagnostic> {
        match &e.kind {
            ExprKind::Int { value } => Ok(Value::Int(*value)),
            ExprKind::Str { raw } | ExprKind::Inline { raw } => Ok(Value::Key(raw.clone())),
            ExprKind::Time(t) | ExprKind::AtSubstepZero(t) => self.time(t, b),
            ExprKind::Ident { name } => {
                b.lookup(name).cloned().ok_or_else(|| unbound(e.span, format!("`{name}` is not bound here")))
            }
            ExprKind::Var(v) => {
                let key = self.var_key(v, b)?;
                match self.env.var(&key) {
                    Some(s) => Ok(Value::from_text(&s)),
                    None => Err(unbound(e.span, format!("no value for `{key}` in the environment's \"vars\""))),
                }
            }
            ExprKind::Call { .. } => {
                let fp = self.fingerprint(e, b)?;
                match self.env.function(&fp) {
                    Some(s) => Ok(Value::from_text(&s)),
                    None => Err(unbound(e.span, format!("no value for `{fp}` in the environment's \"functions\""))),
                }
            }
            ExprKind::NameRef(n) => self.name_index(n, e.span, b),
            ExprKind::Template { name, .. } => {
                Err(unbound(e.span, format!("template `{name}` has no value in index position")))
            }
            ExprKind::Neg { operand } => {
                let n = self.int(&self.index(operand, b)?, operand.span)?;
                n.checked_neg().map(Value::Int).ok_or_else(|| overflow(e.span))
            }
            ExprKind::Binary { op, .. } if op.is_comparison() || op.is_logical() => {
                Ok(Value::Int(self.condition(e, b)? as i64))
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let l = self.index(lhs, b)?;
                let r = self.index(rhs, b)?;
                self.arith(*op, l, r, e.span)
            }
        }
    }

    fn int(&self, v: &Value, span: Span) -> Result<i64, Diagnostic> {
        v.as_int().ok_or_else(|| unbound(span, format!("`{v}` is not a number")))
    }

    fn arith(&self, op: BinOp, l: Value, r: Value, span: Span) -> Result<Value, Diagnostic> {
        match (l, r) {
            (Value::Coord(mut c), r) => {
                let n = self.int(&r, span)?;
                let last = c.last_mut().expect("coordinates are never empty");
                *last = apply(op, *last, n, span)?;
                Ok(Value::Coord(c))
            }
            (l, Value::Coord(mut c)) if matches!(op, BinOp::Add | BinOp::Mul) => {
                let n = self.int(&l, span)?;
                let last = c.last_mut().expect("coordinates are never empty");
                *last = apply(op, n, *last, span)?;
                Ok(Value::Coord(c))
            }
            (l, r) => Ok(Value::Int(apply(op, self.int(&l, span)?, self.int(&r, span)?, span)?)),
        }
    }

    pub fn time(&self, t: &TimeRef, b: &Bindings) -> Result<Value, Diagnostic> {
        let mut coords = match t.literal_step() {
            Some(n) => vec![n],
            None => {
                let v = b
                    .lookup(&t.base)
                    .ok_or_else(|| unbound(t.span, format!("time variable `@{}` is not bound here", t.base)))?;
                v.coords().ok_or_else(|| unbound(t.span, format!("`@{}` is bound to `{v}`, not a time point", t.base)))?
            }
        };
        for step in &t.chain {
            match step {
                Substep::Var(name) => {
                    let v = b.lookup(name).ok_or_else(|| unbound(t.span, format!("`{name}` is not bound here")))?;
                    coords.push(self.int(v, t.span)?);
                }
                Substep::Index(k) => coords.push(i64::try_from(*k).map_err(|_| overflow(t.span))?),
                Substep::Star => coords = self.env.time.clone(),
                Substep::Count => {
                    let key = coord_key(&coords);
                    return match self.env.substeps.get(&key) {
                        Some(n) => Ok(Value::Int(*n)),
                        None => Err(unbound(t.span, format!("no sub-step count for `{key}` in the environment's \"substeps\""))),
                    };
                }
            }
        }
        Ok(Value::from_coords(coords))
    }

    /// Flattened environment key of a context variable: `sys.tool[2].tool_response`.
    pub fn var_key(&self, v: &ContextVar, b: &Bindings) -> Result<String, Diagnostic> {
        let mut s = v.namespace.as_str().to_string();
        if let Some(agent) = &v.agent {
            s.push_str(&format!("[{}]", self.index(agent, b)?.key_text()));
        }
        self.segments(&mut s, &v.path, b)?;
        Ok(s)
    }

    fn segments(&self, s: &mut String, segs: &[Segment], b: &Bindings) -> Result<(), Diagnostic> {
        for seg in segs {
            s.push('.');
            s.push_str(&seg.name);
            s.push_str(&self.indices(&seg.indices, b)?);
        }
        Ok(())
    }

    fn indices(&self, idx: &[Expr], b: &Bindings) -> Result<String, Diagnostic> {
        if idx.is_empty() {
            return Ok(String::new());
        }
        let parts = idx.iter().map(|i| Ok(self.index(i, b)?.key_text())).collect::<Result<Vec<_>, Diagnostic>>()?;
        Ok(format!("[{}]", parts.join(",")))
    }

    /// Call fingerprint: `summarize(sys.history[3])`.
    pub fn fingerprint(&self, e: &Expr, b: &Bindings) -> Result<String, Diagnostic> {
        match &e.kind {
            ExprKind::Call { name, args, indices } => {
                let args = args.iter().map(|a| self.render_arg(a, b)).collect::<Result<Vec<_>, _>>()?;
                Ok(format!("{name}({}){}", args.join(", "), self.indices(indices, b)?))
            }
            _ => self.render_arg(e, b),
        }
    }

    pub fn render_arg(&self, e: &Expr, b: &Bindings) -> Result<String, Diagnostic> {
        match &e.kind {
            ExprKind::Var(v) => self.var_key(v, b),
            ExprKind::Call { .. } => self.fingerprint(e, b),
            ExprKind::Template { name, args: None } => Ok(name.clone()),
            ExprKind::Template { name, args: Some(args) } => {
                let args = args.iter().map(|a| self.render_arg(a, b)).collect::<Result<Vec<_>, _>>()?;
                Ok(format!("{name}({})", args.join(", ")))
            }
            ExprKind::NameRef(n) => self.name_fingerprint(n, e.span, b),
            ExprKind::Str { raw } => Ok(format!("\"{raw}\"")),
            ExprKind::Inline { raw } => Ok(format!("{{{{{raw}}}}}")),
            _ => Ok(self.index(e, b)?.key_text()),
        }
    }

    pub fn closure<'b>(&self, n: &NameRef, span: Span, b: &'b Bindings) -> Result<&'b Closure, Diagnostic> {
        b.names.get(&n.name).map(|c| c.as_ref()).ok_or_else(|| unbound(span, format!("`${}` is not defined here", n.name)))
    }

    /// Items of a comprehension, each with the bindings it is evaluated under.
    pub fn comprehension(&self, c: &Closure) -> Result<Vec<(Expr, Bindings)>, Diagnostic> {
        match &c.value {
            NameValue::Comprehension { item, binder, iterable } => Ok(self
                .iterate(iterable, &c.env)?
                .into_iter()
                .map(|v| (item.clone(), c.env.clone().with(&binder.name, v)))
                .collect()),
            NameValue::Expr(e) => Ok(vec![(e.clone(), c.env.clone())]),
        }
    }

    pub fn name_fingerprint(&self, n: &NameRef, span: Span, b: &Bindings) -> Result<String, Diagnostic> {
        let c = self.closure(n, span, b)?;
        let mut s = match &c.value {
            NameValue::Expr(e) => self.render_arg(e, &c.env)?,
            NameValue::Comprehension { .. } => {
                let items = self.comprehension(c)?;
                let parts = items.iter().map(|(e, ib)| self.render_arg(e, ib)).collect::<Result<Vec<_>, _>>()?;
                format!("[{}]", parts.join(", "))
            }
        };
        s.push_str(&self.indices(&n.indices, b)?);
        self.segments(&mut s, &n.fields, b)?;
        Ok(s)
    }

    /// 1-based element of a comprehension.
    pub fn nth_item(&self, c: &Closure, idx: &Expr, b: &Bindings) -> Result<(Expr, Bindings), Diagnostic> {
        let i = self.int(&self.index(idx, b)?, idx.span)?;
        let mut items = self.comprehension(c)?;
        let len = items.len();
        if i < 1 || i as usize > len {
            return Err(unbound(idx.span, format!("index {i} is outside 1..={len}")));
        }
        Ok(items.swap_remove(i as usize - 1))
    }

    fn name_index(&self, n: &NameRef, span: Span, b: &Bindings) -> Result<Value, Diagnostic> {
        let c = self.closure(n, span, b)?;
        let is_len = n.fields.len() == 1 && n.fields[0].name == "len" && n.fields[0].indices.is_empty();
        match (&c.value, n.indices.as_slice(), n.fields.is_empty()) {
            (NameValue::Expr(e), [], true) => self.index(e, &c.env),
            (NameValue::Comprehension { .. }, [idx], true) => {
                let (item, ib) = self.nth_item(c, idx, b)?;
                self.index(&item, &ib)
            }
            (NameValue::Comprehension { .. }, [], false) if is_len => Ok(Value::Int(self.comprehension(c)?.len() as i64)),
            (NameValue::Expr(e), [], false) if is_len => {
                let fp = self.render_arg(e, &c.env)?;
                if let Some(items) = self.env.collections.get(&fp) {
                    return Ok(Value::Int(items.len() as i64));
                }
                self.lookup_fp(&format!("{fp}.len"), span)
            }
            _ => {
                let fp = self.name_fingerprint(n, span, b)?;
                self.lookup_fp(&fp, span)
            }
        }
    }

    fn lookup_fp(&self, fp: &str, span: Span) -> Result<Value, Diagnostic> {
        self.env
            .var(fp)
            .or_else(|| self.env.function(fp))
            .map(|s| Value::from_text(&s))
            .ok_or_else(|| unbound(span, format!("no value for `{fp}` in the environment")))
    }

    /// Values a `ForEach` or comprehension visits.
    pub fn iterate(&self, e: &Expr, b: &Bindings) -> Result<Vec<Value>, Diagnostic> {
        match &e.kind {
            ExprKind::Call { name, args, indices } if name == "range" && indices.is_empty() => self.range(args, e.span, b),
            ExprKind::Var(v) => {
                let key = self.var_key(v, b)?;
                self.collection(&key, e.span)
            }
            ExprKind::NameRef(n) if n.indices.is_empty() && n.fields.is_empty() => {
                let c = self.closure(n, e.span, b)?;
                match &c.value {
                    NameValue::Expr(x) => self.iterate(x, &c.env),
                    NameValue::Comprehension { .. } => Err(Diagnostic::error(
                        codes::NOT_ITERABLE,
                        e.span,
                        format!("`${}` is a list of content, not an index collection", n.name),
                    )),
                }
            }
            ExprKind::NameRef(n) => {
                let fp = self.name_fingerprint(n, e.span, b)?;
                self.collection(&fp, e.span)
            }
            ExprKind::Call { .. } => {
                let fp = self.fingerprint(e, b)?;
                self.collection(&fp, e.span)
            }
            other => Err(Diagnostic::error(
                codes::NOT_ITERABLE,
                e.span,
                format!("`{}` is a {}, which cannot be iterated", format_expr(e), other.describe()),
            )),
        }
    }

    fn collection(&self, key: &str, span: Span) -> Result<Vec<Value>, Diagnostic> {
        match self.env.collections.get(key) {
            Some(items) => Ok(items.iter().map(|j| Value::from_text(&crate::expand::env::scalar_text(j))).collect()),
            None => Err(Diagnostic::error(
                codes::NO_COLLECTION,
                span,
                format!("no collection `{key}` in the environment's \"collections\""),
            )),
        }
    }

    fn range(&self, args: &[Expr], span: Span, b: &Bindings) -> Result<Vec<Value>, Diagnostic> {
        let mut v = Vec::with_capacity(args.len());
        for a in args {
            v.push(self.int(&self.index(a, b)?, a.span)?);
        }
        let (start, stop, step) = match v.as_slice() {
            [stop] => (0, *stop, 1),
            [start, stop] => (*start, *stop, 1),
            [start, stop, step] => (*start, *stop, *step),
            _ => {
                return Err(Diagnostic::error(
                    codes::NOT_ITERABLE,
                    span,
                    format!("range takes 1 to 3 arguments, got {}", args.len()),
                ))
            }
        };
        if step <= 0 {
            return Err(Diagnostic::error(codes::BAD_STEP, span, format!("range step must be positive, got {step}")));
        }
        let count = if stop > start { ((stop as i128 - start as i128 + step as i128 - 1) / step as i128) as u128 } else { 0 };
        if count > MAX_ITERATIONS as u128 {
            return Err(Diagnostic::error(codes::OVERFLOW, span, format!("range has {count} elements")));
        }
        Ok((0..count as i64).map(|k| Value::Int(start + k * step)).collect())
    }

    pub fn condition(&self, e: &Expr, b: &Bindings) -> Result<bool, Diagnostic> {
        match &e.kind {
            ExprKind::Binary { op: BinOp::And, lhs, rhs } => Ok(self.condition(lhs, b)? && self.condition(rhs, b)?),
            ExprKind::Binary { op: BinOp::Or, lhs, rhs } => Ok(self.condition(lhs, b)? || self.condition(rhs, b)?),
            ExprKind::Binary { op, lhs, rhs } if op.is_comparison() => {
                match (self.operand(lhs, b), self.operand(rhs, b)) {
                    (Ok(l), Ok(r)) => {
                        if let Some(res) = compare(*op, &l, &r) {
                            return Ok(res);
                        }
                    }
                    (Err(d), _) | (_, Err(d)) if d.code != codes::UNBOUND_IDX => return Err(d),
                    _ => {}
                }
                self.decided(e, b)
            }
            ExprKind::AtSubstepZero(_) => Ok(self.env.time.last() == Some(&0)),
            ExprKind::Int { value } => Ok(*value != 0),
            ExprKind::Neg { .. } | ExprKind::Binary { .. } => Ok(self.int(&self.index(e, b)?, e.span)? != 0),
            _ => {
                if let Some(v) = self.env.conditions.get(&self.condition_key(e, b)) {
                    return Ok(*v);
                }
                match self.index(e, b) {
                    Ok(Value::Int(n)) => Ok(n != 0),
                    Ok(Value::Key(k)) if k == "true" || k == "false" => Ok(k == "true"),
                    Err(d) if d.code != codes::UNBOUND_IDX => Err(d),
                    _ => self.decided(e, b),
                }
            }
        }
    }

    /// A comparison operand: unbound bare identifiers read as enum-like keys.
    pub fn operand(&self, e: &Expr, b: &Bindings) -> Result<Value, Diagnostic> {
        match &e.kind {
            ExprKind::Ident { name } if b.lookup(name).is_none() => Ok(Value::Key(name.clone())),
            _ => self.index(e, b),
        }
    }

    fn decided(&self, e: &Expr, b: &Bindings) -> Result<bool, Diagnostic> {
        let key = self.condition_key(e, b);
        self.env.conditions.get(&key).copied().ok_or_else(|| {
            Diagnostic::error(
                codes::UNDECIDED_COND,
                e.span,
                format!("cannot decide `{}`; add \"{key}\" to the environment's \"conditions\"", format_expr(e)),
            )
        })
    }

    /// `sys.has_tool_call[@t] | t=1`: canonical text plus the bound free variables.
    pub fn condition_key(&self, e: &Expr, b: &Bindings) -> String {
        let mut names = BTreeSet::new();
        free_idents(e, &mut names);
        let bound: Vec<String> =
            names.iter().filter_map(|n| b.lookup(n).map(|v| format!("{n}={v}"))).collect();
        let text = format_expr(e);
        if bound.is_empty() {
            text
        } else {
            format!("{text} | {}", bound.join(","))
        }
    }
}

fn apply(op: BinOp, l: i64, r: i64, span: Span) -> Result<i64, Diagnostic> {
    if matches!(op, BinOp::Div | BinOp::Rem) && r == 0 {
        return Err(Diagnostic::error(codes::DIV_ZERO, span, "division by zero in index arithmetic"));
    }
    let out = match op {
        BinOp::Add => l.checked_add(r),
        BinOp::Sub => l.checked_sub(r),
        BinOp::Mul => l.checked_mul(r),
        BinOp::Div => l.checked_div(r),
        BinOp::Rem => l.checked_rem(r),
        _ => unreachable!("not an arithmetic operator"),
    };
    out.ok_or_else(|| overflow(span))
}

/// Ordering used by comparisons; `None` when the operands are not ordered
/// (keys under `<`, `>`).
pub fn compare(op: BinOp, l: &Value, r: &Value) -> Option<bool> {
    let ord = match (l, r) {
        (Value::Key(a), Value::Key(b)) => {
            return match op {
                BinOp::Eq => Some(a == b),
                BinOp::Ne => Some(a != b),
                _ => None,
            }
        }
        (Value::Key(_), _) | (_, Value::Key(_)) => {
            return match op {
                BinOp::Eq => Some(false),
                BinOp::Ne => Some(true),
                _ => None,
            }
        }
        (Value::Coord(a), Value::Coord(b)) => a.cmp(b),
        (a, b) => a.as_int()?.cmp(&b.as_int()?),
    };
    Some(match op {
        BinOp::Eq => ord == Ordering::Equal,
        BinOp::Ne => ord != Ordering::Equal,
        BinOp::Lt => ord == Ordering::Less,
        BinOp::Gt => ord == Ordering::Greater,
        BinOp::Le => ord != Ordering::Greater,
        BinOp::Ge => ord != Ordering::Less,
        _ => return None,
    })
}

pub fn coord_key(c: &[i64]) -> String {
    let parts: Vec<String> = c.iter().map(i64::to_string).collect();
    format!("[{}]", parts.join(","))
}
