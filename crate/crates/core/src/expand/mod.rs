//! Expansion of a resolved context against an environment document into
//! the concrete sequence of role messages it describes at one time point.

pub mod env;
pub mod eval;
pub mod value;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Serialize, Serializer};

use crate::diag::{codes, Diagnostic, Span};
use crate::semantics::resolve::free_idents;
use crate::semantics::ResolvedContext;
use crate::syntax::ast::*;
use crate::syntax::format::format_expr;

pub use env::{EnvError, EnvironmentDocument};
pub use eval::{eval_condition, eval_index, Eval, MAX_ITERATIONS};
pub use value::{Bindings, Value};

/// Total slots an expansion may produce before it stops with `X-OVERFLOW`.
pub const MAX_SLOTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Template,
    Var,
    Function,
    Unresolved,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Slot {
    pub kind: SlotKind,
    /// Value for resolved vars and functions, symbolic text otherwise.
    pub text: String,
    /// Environment key or call fingerprint the value was looked up under.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(serialize_with = "span_pair")]
    pub span: Span,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub bindings: BTreeMap<String, Value>,
}

fn span_pair<S: Serializer>(s: &Span, ser: S) -> Result<S::Ok, S::Error> {
    [s.start, s.end].serialize(ser)
}

impl Slot {
    pub fn has_value(&self) -> bool {
        matches!(self.kind, SlotKind::Var | SlotKind::Function)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Message {
    pub role: Role,
    pub slots: Vec<Slot>,
}

/// Where a `Mark` block landed: a half-open message range, and the slot
/// range when the mark sat inside a single message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarkRecord {
    pub number: u64,
    pub messages: [usize; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slots: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExpandedPrompt {
    pub messages: Vec<Message>,
    pub marks: Vec<MarkRecord>,
}

impl ExpandedPrompt {
    pub fn roles(&self) -> Vec<Role> {
        self.messages.iter().map(|m| m.role).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("expanded prompts always serialize")
    }

    /// Plain-text listing, one role header per message and one slot per line.
    /// Unresolved slots print as `{?key}`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            out.push_str(m.role.letter());
            out.push_str(":\n");
            for s in &m.slots {
                let text = match s.kind {
                    SlotKind::Unresolved => format!("{{?{}}}", s.text),
                    _ => s.text.clone(),
                };
                for line in text.lines() {
                    out.push_str("  ");
                    out.push_str(line);
                    out.push('\n');
                }
                if text.is_empty() {
                    out.push_str("  \n");
                }
            }
        }
        for mk in &self.marks {
            out.push_str(&format!("Mark {}: messages {}..{}", mk.number, mk.messages[0], mk.messages[1]));
            if let Some([a, b]) = mk.slots {
                out.push_str(&format!(", slots {a}..{b}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Bindings for the context's parameters: time levels from `env.time`,
/// plain parameters from `env.params`.
pub fn context_bindings(ctx: &ResolvedContext, env: &EnvironmentDocument) -> Result<Bindings, Diagnostic> {
    let levels = ctx.time_levels();
    let required = levels.iter().position(|l| l == "*").unwrap_or(levels.len());
    if env.time.len() < required {
        let span = ctx.context.params.first().map(|p| p.span()).unwrap_or(ctx.context.name.span);
        return Err(Diagnostic::error(
            codes::TIME_DEPTH,
            span,
            format!(
                "context `{}` needs a time point with {required} coordinates, the environment gives {}",
                ctx.name(),
                env.time.len()
            ),
        ));
    }
    let mut b = Bindings::new();
    for (level, &coord) in levels.iter().zip(&env.time) {
        if level.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) && level != "substeps" {
            b.set(level, Value::Int(coord));
        }
    }
    b.time_levels = levels;
    for p in &ctx.context.params {
        if let Param::Plain(id) = p {
            if let Some(v) = env.param(&id.name) {
                b.set(&id.name, Value::from_text(&v));
            }
        }
    }
    Ok(b)
}

pub fn expand(ctx: &ResolvedContext, env: &EnvironmentDocument) -> (ExpandedPrompt, Vec<Diagnostic>) {
    let b = match context_bindings(ctx, env) {
        Ok(b) => b,
        Err(d) => return (ExpandedPrompt::default(), vec![d]),
    };
    let mut x = Expander { eval: Eval { env }, out: ExpandedPrompt::default(), current: None, diags: Vec::new(), slots: 0 };
    x.blocks(ctx.body(), &b);
    (x.out, x.diags)
}

/// Expands once per environment. Time points must strictly increase.
#[allow(clippy::type_complexity)]
pub fn expand_series(
    ctx: &ResolvedContext,
    envs: &[EnvironmentDocument],
) -> Result<Vec<(ExpandedPrompt, Vec<Diagnostic>)>, Diagnostic> {
    if envs.is_empty() {
        return Err(Diagnostic::error(codes::EMPTY_SERIES, Span::default(), "the environment series is empty"));
    }
    for (i, w) in envs.windows(2).enumerate() {
        if w[0].time >= w[1].time {
            return Err(Diagnostic::error(
                codes::SERIES_ORDER,
                Span::default(),
                format!(
                    "time points must strictly increase: entry {} has {:?}, entry {} has {:?}",
                    i + 1,
                    w[0].time,
                    i + 2,
                    w[1].time
                ),
            ));
        }
    }
    Ok(envs.iter().map(|e| expand(ctx, e)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flow {
    Normal,
    Break,
    Continue,
    End,
}

struct Expander<'a> {
    eval: Eval<'a>,
    out: ExpandedPrompt,
    current: Option<Message>,
    diags: Vec<Diagnostic>,
    slots: usize,
}

impl<'a> Expander<'a> {
    fn blocks(&mut self, blocks: &[Block], outer: &Bindings) -> Flow {
        let mut b = outer.clone();
        for block in blocks {
            let flow = self.block(block, &mut b);
            if flow != Flow::Normal {
                return flow;
            }
        }
        Flow::Normal
    }

    fn block(&mut self, block: &Block, b: &mut Bindings) -> Flow {
        match &block.kind {
            BlockKind::Role(r) => {
                if self.current.is_some() {
                    return self.blocks(&r.body, b);
                }
                self.current = Some(Message { role: r.role, slots: Vec::new() });
                let flow = self.blocks(&r.body, b);
                let msg = self.current.take().expect("message under construction");
                self.out.messages.push(msg);
                flow
            }
            BlockKind::ForEach(f) => {
                let values = match self.eval.iterate(&f.iterable, b) {
                    Ok(v) => v,
                    Err(d) => {
                        self.diags.push(d);
                        return Flow::Normal;
                    }
                };
                for v in values {
                    let inner = b.clone().with(&f.binder.name, v);
                    match self.blocks(&f.body, &inner) {
                        Flow::Break => break,
                        Flow::End => return Flow::End,
                        Flow::Normal | Flow::Continue => {}
                    }
                }
                Flow::Normal
            }
            BlockKind::If(chain) => {
                for br in &chain.branches {
                    match self.eval.condition(&br.condition, b) {
                        Ok(true) => return self.blocks(&br.body, b),
                        Ok(false) => {}
                        Err(d) => {
                            self.diags.push(d);
                            return Flow::Normal;
                        }
                    }
                }
                match &chain.else_body {
                    Some(body) => self.blocks(body, b),
                    None => Flow::Normal,
                }
            }
            BlockKind::Switch(s) => {
                let v = match self.eval.operand(&s.scrutinee, b) {
                    Ok(v) => v,
                    Err(d) => {
                        let d = if d.code == codes::UNBOUND_IDX {
                            Diagnostic::error(
                                codes::UNDECIDED_COND,
                                s.scrutinee.span,
                                format!("cannot decide which case of `Switch {}` applies: {}", format_expr(&s.scrutinee), d.message),
                            )
                        } else {
                            d
                        };
                        self.diags.push(d);
                        return Flow::Normal;
                    }
                };
                for c in &s.cases {
                    let label = match &c.label {
                        CaseLabel::Int(n) => Value::Int(*n),
                        CaseLabel::Str(s) | CaseLabel::Ident(s) => Value::from_text(s),
                    };
                    if eval::compare(BinOp::Eq, &v, &label) == Some(true) {
                        return self.blocks(&c.body, b);
                    }
                }
                match &s.default {
                    Some(body) => self.blocks(body, b),
                    None => Flow::Normal,
                }
            }
            BlockKind::Mark(m) => {
                let m0 = self.out.messages.len();
                let s0 = self.current.as_ref().map(|c| c.slots.len());
                let flow = self.blocks(&m.body, b);
                let record = match (s0, &self.current) {
                    (Some(s0), Some(cur)) => {
                        MarkRecord { number: m.number, messages: [m0, m0 + 1], slots: Some([s0, cur.slots.len()]) }
                    }
                    _ => MarkRecord { number: m.number, messages: [m0, self.out.messages.len()], slots: None },
                };
                self.out.marks.push(record);
                flow
            }
            BlockKind::PromptEndsHere { condition } => match self.eval.condition(condition, b) {
                Ok(true) => Flow::End,
                Ok(false) => Flow::Normal,
                Err(d) => {
                    self.diags.push(d);
                    Flow::Normal
                }
            },
            BlockKind::Name(n) => {
                b.define(&n.name.name, n.value.clone());
                Flow::Normal
            }
            BlockKind::Element(e) => {
                if self.current.is_none() {
                    return Flow::Normal;
                }
                let slots = self.content(e, b);
                self.slots += slots.len();
                if self.slots > MAX_SLOTS {
                    self.diags.push(Diagnostic::error(
                        codes::OVERFLOW,
                        e.span,
                        format!("expansion produced more than {MAX_SLOTS} slots"),
                    ));
                    return Flow::End;
                }
                self.current.as_mut().expect("inside a message").slots.extend(slots);
                Flow::Normal
            }
            BlockKind::Break => Flow::Break,
            BlockKind::Continue => Flow::Continue,
            BlockKind::Frag(_) | BlockKind::Comment(_) => Flow::Normal,
        }
    }

    fn slot(&self, kind: SlotKind, text: String, key: Option<String>, e: &Expr, b: &Bindings) -> Slot {
        let mut names = BTreeSet::new();
        free_idents(e, &mut names);
        let bindings = names.into_iter().filter_map(|n| b.lookup(&n).cloned().map(|v| (n, v))).collect();
        Slot { kind, text, key, span: e.span, bindings }
    }

    fn content(&mut self, e: &Expr, b: &Bindings) -> Vec<Slot> {
        let ev = self.eval;
        match &e.kind {
            ExprKind::Template { args: None, name } => vec![self.slot(SlotKind::Template, name.clone(), None, e, b)],
            ExprKind::Template { .. } => {
                let text = ev.render_arg(e, b).unwrap_or_else(|d| {
                    self.diags.push(d);
                    format_expr(e)
                });
                vec![self.slot(SlotKind::Template, text, None, e, b)]
            }
            ExprKind::Var(v) => vec![match ev.var_key(v, b) {
                Ok(key) => match ev.env.var(&key) {
                    Some(val) => self.slot(SlotKind::Var, val, Some(key), e, b),
                    None => self.slot(SlotKind::Unresolved, key.clone(), Some(key), e, b),
                },
                Err(d) => {
                    self.diags.push(d);
                    self.slot(SlotKind::Unresolved, format_expr(e), None, e, b)
                }
            }],
            ExprKind::Call { .. } => vec![match ev.fingerprint(e, b) {
                Ok(fp) => match ev.env.function(&fp) {
                    Some(val) => self.slot(SlotKind::Function, val, Some(fp), e, b),
                    None => self.slot(SlotKind::Unresolved, fp.clone(), Some(fp), e, b),
                },
                Err(d) => {
                    self.diags.push(d);
                    self.slot(SlotKind::Unresolved, format_expr(e), None, e, b)
                }
            }],
            ExprKind::Str { raw } | ExprKind::Inline { raw } => {
                vec![self.slot(SlotKind::Literal, raw.clone(), None, e, b)]
            }
            ExprKind::NameRef(n) => self.name_content(n, e, b),
            _ => vec![match ev.index(e, b) {
                Ok(v) => self.slot(SlotKind::Literal, v.to_string(), None, e, b),
                Err(d) => {
                    self.diags.push(d);
                    self.slot(SlotKind::Unresolved, format_expr(e), None, e, b)
                }
            }],
        }
    }

    fn name_content(&mut self, n: &NameRef, e: &Expr, b: &Bindings) -> Vec<Slot> {
        let ev = self.eval;
        let result: Result<Vec<Slot>, Diagnostic> = (|| {
            let c = ev.closure(n, e.span, b)?;
            match (&c.value, n.indices.as_slice(), n.fields.is_empty()) {
                (NameValue::Comprehension { .. }, [], true) => {
                    let items = ev.comprehension(c)?;
                    Ok(items.iter().flat_map(|(item, ib)| self.content(item, ib)).collect())
                }
                (NameValue::Comprehension { .. }, [idx], true) => {
                    let (item, ib) = ev.nth_item(c, idx, b)?;
                    Ok(self.content(&item, &ib))
                }
                (NameValue::Expr(x), [], true) => {
                    let env = c.env.clone();
                    let mut slots = self.content(x, &env);
                    for s in &mut slots {
                        s.span = e.span;
                    }
                    Ok(slots)
                }
                _ => {
                    let fp = ev.name_fingerprint(n, e.span, b)?;
                    Ok(vec![if let Some(v) = ev.env.var(&fp) {
                        self.slot(SlotKind::Var, v, Some(fp), e, b)
                    } else if let Some(v) = ev.env.function(&fp) {
                        self.slot(SlotKind::Function, v, Some(fp), e, b)
                    } else {
                        self.slot(SlotKind::Unresolved, fp.clone(), Some(fp), e, b)
                    }])
                }
            }
        })();
        result.unwrap_or_else(|d| {
            self.diags.push(d);
            vec![self.slot(SlotKind::Unresolved, format_expr(e), None, e, b)]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::resolve;
    use crate::syntax::parse;

    fn run(src: &str, env: &EnvironmentDocument) -> (ExpandedPrompt, Vec<Diagnostic>) {
        let (doc, d) = parse(src);
        assert!(d.is_empty(), "{d:#?}");
        let name = doc.contexts().next().unwrap().name.name.clone();
        let (ctx, d) = resolve(&doc, &name);
        assert!(d.is_empty(), "{d:#?}");
        expand(&ctx.unwrap(), env)
    }

    fn codes(d: &[Diagnostic]) -> Vec<&str> {
        d.iter().map(|d| d.code).collect()
    }

    #[test]
    fn loop_over_range() {
        let src = "P[@T]: {\n  ForEach(@t: range(1, @T)) {\n    U: env.q[@t]\n  }\n}\n";
        let env = EnvironmentDocument::at(&[4]).with_var("env.q[2]", "two");
        let (p, d) = run(src, &env);
        assert!(d.is_empty());
        assert_eq!(p.roles(), vec![Role::U; 3]);
        assert_eq!(p.messages[1].slots[0].text, "two");
        assert_eq!(p.messages[0].slots[0].kind, SlotKind::Unresolved);
        assert_eq!(p.messages[0].slots[0].text, "env.q[1]");
    }

    #[test]
    fn undecided_condition_skips_construct() {
        let src = "P[@T]: {\n  If sys.flag[@T] {\n    U: env.a\n  }\n  S: X\n}\n";
        let (p, d) = run(src, &EnvironmentDocument::at(&[2]));
        assert_eq!(codes(&d), vec![codes::UNDECIDED_COND]);
        assert!(d[0].message.contains("sys.flag[@T] | T=2"), "{}", d[0].message);
        assert_eq!(p.roles(), vec![Role::S]);
        let mut env = EnvironmentDocument::at(&[2]);
        env.conditions.insert("sys.flag[@T] | T=2".into(), true);
        assert_eq!(run(src, &env).0.roles(), vec![Role::U, Role::S]);
    }

    #[test]
    fn break_continue_and_prompt_end() {
        let src = "P[@T]: {\n  ForEach(@t: range(1, 10)) {\n    If t == 2 {\n      continue\n    }\n    If t == 4 {\n      break\n    }\n    U: env.q[@t]\n  }\n  A: {\n    X\n    PromptEndsHere when @T.0\n    Y\n  }\n  S: Z\n}\n";
        let (p, d) = run(src, &EnvironmentDocument::at(&[1]));
        assert!(d.is_empty(), "{d:?}");
        assert_eq!(p.roles(), vec![Role::U, Role::U, Role::A, Role::S]);
        let (p, _) = run(&src.replace("P[@T]", "P[@T.I]"), &EnvironmentDocument::at(&[1, 0]));
        assert_eq!(p.roles(), vec![Role::U, Role::U, Role::A]);
        assert_eq!(p.messages[2].slots.len(), 1);
    }

    #[test]
    fn index_arithmetic_errors() {
        let env = EnvironmentDocument::at(&[3]);
        let b = Bindings::new().with("t", Value::Int(3));
        let e = |s: &str| crate::syntax::parse_expr(s).0.unwrap();
        assert_eq!(eval_index(&e("t / 2"), &b, &env).unwrap(), Value::Int(1));
        assert_eq!(eval_index(&e("-7 % 3"), &b, &env).unwrap(), Value::Int(-1));
        assert_eq!(eval_index(&e("t / 0"), &b, &env).unwrap_err().code, codes::DIV_ZERO);
        assert_eq!(eval_index(&e("9223372036854775807 + t"), &b, &env).unwrap_err().code, codes::OVERFLOW);
        assert_eq!(eval_index(&e("u"), &b, &env).unwrap_err().code, codes::UNBOUND_IDX);
    }

    #[test]
    fn range_step_and_collections() {
        let src = "P[@T]: {\n  ForEach(t: range(1, 5, 0)) {\n    U: X\n  }\n  ForEach(b: env.bombs) {\n    U: env.bomb[b].pos\n  }\n}\n";
        let (p, d) = run(src, &EnvironmentDocument::at(&[1]));
        assert_eq!(codes(&d), vec![codes::BAD_STEP, codes::NO_COLLECTION]);
        assert!(p.messages.is_empty());
        let mut env = EnvironmentDocument::at(&[1]);
        env.collections.insert("env.bombs".into(), vec!["b1".into(), "b2".into()]);
        let (p, _) = run(src, &env);
        assert_eq!(p.messages[1].slots[0].text, "env.bomb[\"b2\"].pos");
    }

    #[test]
    fn substeps_and_coordinates() {
        let src = "P[@T.I]: {\n  ForEach(@i: range(0, @T.substeps)) {\n    A: resp.step[@T.i]\n  }\n  U: env.q[@T.I - 1]\n}\n";
        let mut env = EnvironmentDocument::at(&[2, 3]);
        env.substeps.insert("[2]".into(), 2);
        let (p, d) = run(src, &env);
        assert!(d.is_empty(), "{d:?}");
        let texts: Vec<&str> = p.messages.iter().map(|m| m.slots[0].text.as_str()).collect();
        assert_eq!(texts, vec!["resp.step[2.0]", "resp.step[2.1]", "env.q[2.2]"]);
        assert_eq!(run(src, &EnvironmentDocument::at(&[2])).1[0].code, codes::TIME_DEPTH);
    }

    #[test]
    fn names_and_comprehensions() {
        let src = "P[@T]: {\n  Name hist := [sys.summary[@t] for t in range(1, @T)]\n  Name q := env.question[@T]\n  U: {\n    $hist\n    $hist[2]\n    $q\n  }\n}\n";
        let env = EnvironmentDocument::at(&[4]).with_var("env.question[4]", "why?");
        let (p, d) = run(src, &env);
        assert!(d.is_empty(), "{d:?}");
        let texts: Vec<&str> = p.messages[0].slots.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["sys.summary[1]", "sys.summary[2]", "sys.summary[3]", "sys.summary[2]", "why?"]);
    }

    #[test]
    fn functions_by_fingerprint() {
        let src = "P[@T]: {\n  S: summarize(sys.history[@T])\n}\n";
        let mut env = EnvironmentDocument::at(&[3]);
        env.functions.insert("summarize(sys.history[3])".into(), "short".into());
        let (p, _) = run(src, &env);
        assert_eq!(p.messages[0].slots[0].kind, SlotKind::Function);
        assert_eq!(p.messages[0].slots[0].text, "short");
    }

    #[test]
    fn marks_are_recorded() {
        let src = "P[@T]: {\n  Mark 1 {\n    S: X\n    U: Y\n  }\n  A: {\n    Mark 2 {\n      Z\n    }\n  }\n}\n";
        let (p, _) = run(src, &EnvironmentDocument::at(&[1]));
        assert_eq!(p.marks[0], MarkRecord { number: 1, messages: [0, 2], slots: None });
        assert_eq!(p.marks[1], MarkRecord { number: 2, messages: [2, 3], slots: Some([0, 1]) });
    }

    #[test]
    fn series_checks() {
        let (doc, _) = parse("P[@T]: {\n  S: X\n}\n");
        let (ctx, _) = resolve(&doc, "P");
        let ctx = ctx.unwrap();
        assert_eq!(expand_series(&ctx, &[]).unwrap_err().code, codes::EMPTY_SERIES);
        let envs = [EnvironmentDocument::at(&[2]), EnvironmentDocument::at(&[2])];
        assert_eq!(expand_series(&ctx, &envs).unwrap_err().code, codes::SERIES_ORDER);
        let envs = [EnvironmentDocument::at(&[1, 5]), EnvironmentDocument::at(&[2])];
        assert_eq!(expand_series(&ctx, &envs).unwrap().len(), 2);
    }
}
