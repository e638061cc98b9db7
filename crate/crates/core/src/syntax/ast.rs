//! Span-annotated syntax tree.
//!
//! Derived equality ignores spans (see [`Span`]), so `a == b` on two trees
//! is structural equality.

use std::fmt;

use serde::Serialize;

use crate::diag::Span;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Document {
    pub items: Vec<Item>,
}

impl Document {
    pub fn contexts(&self) -> impl Iterator<Item = &ContextDef> {
        self.items.iter().filter_map(|i| match i {
            Item::Context(c) => Some(c),
            _ => None,
        })
    }

    pub fn fragments(&self) -> impl Iterator<Item = &FragmentDef> {
        self.items.iter().filter_map(|i| match i {
            Item::Fragment(f) => Some(f),
            _ => None,
        })
    }

    pub fn context(&self, name: &str) -> Option<&ContextDef> {
        self.contexts().find(|c| c.name.name == name)
    }

    pub fn fragment(&self, name: &str) -> Option<&FragmentDef> {
        self.fragments().find(|f| f.name.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "item", rename_all = "snake_case")]
pub enum Item {
    Context(ContextDef),
    Fragment(FragmentDef),
    Comment(Comment),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>, span: Span) -> Self {
        Ident { name: name.into(), span }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContextDef {
    pub name: Ident,
    pub params: Vec<Param>,
    pub body: Vec<Block>,
    pub span: Span,
}

impl ContextDef {
    /// Names of the time parameter and its sub-step levels, outermost first.
    /// `@T.I` yields `["T", "I"]`; `@T.*` yields `["T", "*"]`.
    pub fn time_levels(&self) -> Vec<String> {
        time_levels(&self.params)
    }
}

pub fn time_levels(params: &[Param]) -> Vec<String> {
    params
        .iter()
        .find_map(|p| match p {
            Param::Time(t) => {
                let mut levels = vec![t.base.clone()];
                levels.extend(t.chain.iter().map(|s| s.to_string()));
                Some(levels)
            }
            Param::Plain(_) => None,
        })
        .unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FragKind {
    Str,
    Roles,
}

impl FragKind {
    pub fn keyword(self) -> &'static str {
        match self {
            FragKind::Str => "StrFrag",
            FragKind::Roles => "RolesFrag",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FragmentDef {
    pub kind: FragKind,
    pub name: Ident,
    pub params: Vec<Param>,
    pub body: Vec<Block>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "param", rename_all = "snake_case")]
pub enum Param {
    Time(TimeRef),
    Plain(Ident),
}

impl Param {
    /// Binding name: `@t` binds `t`, `tool` binds `tool`.
    pub fn name(&self) -> &str {
        match self {
            Param::Time(t) => &t.base,
            Param::Plain(i) => &i.name,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Param::Time(t) => t.span,
            Param::Plain(i) => i.span,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Role {
    S,
    U,
    A,
    T,
    N,
}

impl Role {
    pub const ALL: [Role; 5] = [Role::S, Role::U, Role::A, Role::T, Role::N];

    pub fn letter(self) -> &'static str {
        match self {
            Role::S => "S",
            Role::U => "U",
            Role::A => "A",
            Role::T => "T",
            Role::N => "N",
        }
    }

    pub fn from_letter(s: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.letter() == s)
    }

    pub fn is_chat(self) -> bool {
        self != Role::N
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Block {
    pub kind: BlockKind,
    pub span: Span,
}

impl Block {
    pub fn new(kind: BlockKind, span: Span) -> Self {
        Block { kind, span }
    }

    pub fn is_comment(&self) -> bool {
        matches!(self.kind, BlockKind::Comment(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "block", rename_all = "snake_case")]
pub enum BlockKind {
    Role(RoleMessage),
    ForEach(ForEach),
    If(IfChain),
    Switch(Switch),
    Mark(Mark),
    PromptEndsHere { condition: Expr },
    Name(NameDef),
    Frag(FragInvoke),
    Comment(Comment),
    Element(Expr),
    Break,
    Continue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoleMessage {
    pub role: Role,
    pub single_line: bool,
    pub body: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Binder {
    pub name: String,
    /// Written with `@`, or iterating a range whose bounds mention time.
    pub time: bool,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ForEach {
    pub binder: Binder,
    pub iterable: Expr,
    pub body: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Branch {
    pub condition: Expr,
    pub body: Vec<Block>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IfChain {
    pub branches: Vec<Branch>,
    pub else_body: Option<Vec<Block>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "label", content = "value", rename_all = "snake_case")]
pub enum CaseLabel {
    Str(String),
    Ident(String),
    Int(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Case {
    pub label: CaseLabel,
    pub body: Vec<Block>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Switch {
    pub scrutinee: Expr,
    pub cases: Vec<Case>,
    pub default: Option<Vec<Block>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mark {
    pub number: u64,
    pub body: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NameDef {
    pub name: Ident,
    pub value: NameValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "value", rename_all = "snake_case")]
pub enum NameValue {
    Expr(Expr),
    Comprehension { item: Expr, binder: Binder, iterable: Expr },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FragInvoke {
    pub name: Ident,
    pub args: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Comment {
    /// Full comment text including the leading `//`.
    pub text: String,
    /// Written on the same line after another element.
    pub inline: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// An expression with a default span, for synthesized trees.
    pub fn synth(kind: ExprKind) -> Self {
        Expr { kind, span: Span::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "|",
            BinOp::And => "&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::Or | BinOp::And)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Namespace {
    Env,
    Sys,
    Resp,
}

impl Namespace {
    pub fn as_str(self) -> &'static str {
        match self {
            Namespace::Env => "env",
            Namespace::Sys => "sys",
            Namespace::Resp => "resp",
        }
    }

    pub fn parse(s: &str) -> Option<Namespace> {
        match s {
            "env" => Some(Namespace::Env),
            "sys" => Some(Namespace::Sys),
            "resp" => Some(Namespace::Resp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub name: String,
    pub indices: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContextVar {
    pub namespace: Namespace,
    pub agent: Option<Box<Expr>>,
    pub path: Vec<Segment>,
}

impl ContextVar {
    /// `sys.tool.tool_response`, without indices or agent qualifier.
    pub fn dotted_path(&self) -> String {
        let mut s = self.namespace.as_str().to_string();
        for seg in &self.path {
            s.push('.');
            s.push_str(&seg.name);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NameRef {
    pub name: String,
    pub indices: Vec<Expr>,
    pub fields: Vec<Segment>,
    /// Where the referenced name was bound; filled in by resolution.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binding: Option<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "step", content = "value", rename_all = "snake_case")]
pub enum Substep {
    Var(String),
    Index(u64),
    Star,
    /// The `substeps` attribute.
    Count,
}

impl fmt::Display for Substep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Substep::Var(v) => f.write_str(v),
            Substep::Index(i) => write!(f, "{i}"),
            Substep::Star => f.write_str("*"),
            Substep::Count => f.write_str("substeps"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimeRef {
    /// Letters of the time variable (`T`, `t`) or the digits of a literal step (`1`).
    pub base: String,
    pub chain: Vec<Substep>,
    pub span: Span,
}

impl TimeRef {
    pub fn literal_step(&self) -> Option<i64> {
        self.base.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "expr", rename_all = "snake_case")]
pub enum ExprKind {
    Int { value: i64 },
    /// Quoted string; `raw` is the text between the quotes, escapes untouched.
    Str { raw: String },
    /// `{{ ... }}` literal; `raw` is the text between the braces.
    Inline { raw: String },
    Time(TimeRef),
    /// A bare `@T.0` used as a boolean: "the current sub-step is the first".
    AtSubstepZero(TimeRef),
    Ident { name: String },
    Template { name: String, args: Option<Vec<Expr>> },
    Call { name: String, args: Vec<Expr>, indices: Vec<Expr> },
    Var(ContextVar),
    NameRef(NameRef),
    Neg { operand: Box<Expr> },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
}

impl ExprKind {
    pub fn describe(&self) -> &'static str {
        match self {
            ExprKind::Int { .. } => "integer",
            ExprKind::Str { .. } => "string literal",
            ExprKind::Inline { .. } => "inline literal",
            ExprKind::Time(_) | ExprKind::AtSubstepZero(_) => "time reference",
            ExprKind::Ident { .. } => "identifier",
            ExprKind::Template { .. } => "template",
            ExprKind::Call { .. } => "function call",
            ExprKind::Var(_) => "context variable",
            ExprKind::NameRef(_) => "name reference",
            ExprKind::Neg { .. } | ExprKind::Binary { .. } => "expression",
        }
    }
}

// ---------------------------------------------------------------------------
// Traversal helpers

/// Calls `f` on every block in `blocks`, depth first, parents before children.
pub fn walk_blocks<'a>(blocks: &'a [Block], f: &mut impl FnMut(&'a Block)) {
    for b in blocks {
        f(b);
        for child in child_lists(b) {
            walk_blocks(child, f);
        }
    }
}

/// The nested block lists directly owned by `block`, in source order.
pub fn child_lists(block: &Block) -> Vec<&Vec<Block>> {
    match &block.kind {
        BlockKind::Role(r) => vec![&r.body],
        BlockKind::ForEach(f) => vec![&f.body],
        BlockKind::If(chain) => {
            let mut v: Vec<&Vec<Block>> = chain.branches.iter().map(|b| &b.body).collect();
            v.extend(chain.else_body.as_ref());
            v
        }
        BlockKind::Switch(s) => {
            let mut v: Vec<&Vec<Block>> = s.cases.iter().map(|c| &c.body).collect();
            v.extend(s.default.as_ref());
            v
        }
        BlockKind::Mark(m) => vec![&m.body],
        _ => Vec::new(),
    }
}

pub fn child_lists_mut(block: &mut Block) -> Vec<&mut Vec<Block>> {
    match &mut block.kind {
        BlockKind::Role(r) => vec![&mut r.body],
        BlockKind::ForEach(f) => vec![&mut f.body],
        BlockKind::If(chain) => {
            let mut v: Vec<&mut Vec<Block>> =
                chain.branches.iter_mut().map(|b| &mut b.body).collect();
            v.extend(chain.else_body.as_mut());
            v
        }
        BlockKind::Switch(s) => {
            let mut v: Vec<&mut Vec<Block>> = s.cases.iter_mut().map(|c| &mut c.body).collect();
            v.extend(s.default.as_mut());
            v
        }
        BlockKind::Mark(m) => vec![&mut m.body],
        _ => Vec::new(),
    }
}

/// Top-level expressions owned directly by a block (not by its children).
pub fn block_exprs(block: &Block) -> Vec<&Expr> {
    match &block.kind {
        BlockKind::ForEach(f) => vec![&f.iterable],
        BlockKind::If(chain) => chain.branches.iter().map(|b| &b.condition).collect(),
        BlockKind::Switch(s) => vec![&s.scrutinee],
        BlockKind::PromptEndsHere { condition } => vec![condition],
        BlockKind::Name(n) => match &n.value {
            NameValue::Expr(e) => vec![e],
            NameValue::Comprehension { item, iterable, .. } => vec![iterable, item],
        },
        BlockKind::Frag(f) => f.args.iter().collect(),
        BlockKind::Element(e) => vec![e],
        _ => Vec::new(),
    }
}

pub fn block_exprs_mut(block: &mut Block) -> Vec<&mut Expr> {
    match &mut block.kind {
        BlockKind::ForEach(f) => vec![&mut f.iterable],
        BlockKind::If(chain) => chain.branches.iter_mut().map(|b| &mut b.condition).collect(),
        BlockKind::Switch(s) => vec![&mut s.scrutinee],
        BlockKind::PromptEndsHere { condition } => vec![condition],
        BlockKind::Name(n) => match &mut n.value {
            NameValue::Expr(e) => vec![e],
            NameValue::Comprehension { item, iterable, .. } => vec![iterable, item],
        },
        BlockKind::Frag(f) => f.args.iter_mut().collect(),
        BlockKind::Element(e) => vec![e],
        _ => Vec::new(),
    }
}

/// Direct sub-expressions of `expr`.
pub fn sub_exprs(expr: &Expr) -> Vec<&Expr> {
    match &expr.kind {
        ExprKind::Template { args, .. } => args.iter().flatten().collect(),
        ExprKind::Call { args, indices, .. } => args.iter().chain(indices).collect(),
        ExprKind::Var(v) => {
            let mut out: Vec<&Expr> = v.agent.iter().map(|a| a.as_ref()).collect();
            for seg in &v.path {
                out.extend(&seg.indices);
            }
            out
        }
        ExprKind::NameRef(n) => {
            let mut out: Vec<&Expr> = n.indices.iter().collect();
            for seg in &n.fields {
                out.extend(&seg.indices);
            }
            out
        }
        ExprKind::Neg { operand } => vec![operand],
        ExprKind::Binary { lhs, rhs, .. } => vec![lhs, rhs],
        _ => Vec::new(),
    }
}

pub fn sub_exprs_mut(expr: &mut Expr) -> Vec<&mut Expr> {
    match &mut expr.kind {
        ExprKind::Template { args, .. } => args.iter_mut().flatten().collect(),
        ExprKind::Call { args, indices, .. } => args.iter_mut().chain(indices.iter_mut()).collect(),
        ExprKind::Var(v) => {
            let mut out: Vec<&mut Expr> = v.agent.iter_mut().map(|a| a.as_mut()).collect();
            for seg in &mut v.path {
                out.extend(seg.indices.iter_mut());
            }
            out
        }
        ExprKind::NameRef(n) => {
            let mut out: Vec<&mut Expr> = n.indices.iter_mut().collect();
            for seg in &mut n.fields {
                out.extend(seg.indices.iter_mut());
            }
            out
        }
        ExprKind::Neg { operand } => vec![operand.as_mut()],
        ExprKind::Binary { lhs, rhs, .. } => vec![lhs.as_mut(), rhs.as_mut()],
        _ => Vec::new(),
    }
}

/// Calls `f` on `expr` and every expression nested in it, pre-order.
pub fn walk_expr<'a>(expr: &'a Expr, f: &mut impl FnMut(&'a Expr)) {
    f(expr);
    for e in sub_exprs(expr) {
        walk_expr(e, f);
    }
}

/// Removes comments at every nesting level.
pub fn strip_comments(blocks: &mut Vec<Block>) {
    blocks.retain(|b| !b.is_comment());
    for b in blocks.iter_mut() {
        for list in child_lists_mut(b) {
            strip_comments(list);
        }
    }
}

/// Replaces every `Mark` wrapper by its body.
pub fn unwrap_marks(blocks: Vec<Block>) -> Vec<Block> {
    let mut out = Vec::with_capacity(blocks.len());
    for mut b in blocks {
        if let BlockKind::Mark(m) = b.kind {
            out.extend(unwrap_marks(m.body));
            continue;
        }
        for list in child_lists_mut(&mut b) {
            let taken = std::mem::take(list);
            *list = unwrap_marks(taken);
        }
        out.push(b);
    }
    out
}

/// Collects the text of every comment in document order.
pub fn comment_texts(doc: &Document) -> Vec<String> {
    let mut out = Vec::new();
    let mut collect = |blocks: &[Block]| {
        walk_blocks(blocks, &mut |b| {
            if let BlockKind::Comment(c) = &b.kind {
                out.push(c.text.clone());
            }
        })
    };
    let mut top = Vec::new();
    for item in &doc.items {
        match item {
            Item::Comment(c) => top.push(c.text.clone()),
            Item::Context(c) => collect(&c.body),
            Item::Fragment(f) => collect(&f.body),
        }
    }
    out.extend(top);
    out
}
