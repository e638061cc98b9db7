use serde::Serialize;

use crate::diag::Span;
use crate::syntax::ast::*;
use crate::syntax::format::{block_header, format_block, format_expr, time_ref};

/// Node payload; two nodes carry the same label iff their kinds are equal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffKind {
    Context { name: String, params: Vec<Param> },
    Role { role: Role, single_line: bool },
    Element { expr: Expr },
    ForEach { binder: Binder, iterable: Expr },
    IfChain,
    /// `None` is the `Else` branch.
    Branch { condition: Option<Expr> },
    Switch { scrutinee: Expr },
    /// `None` is `Default`.
    Case { label: Option<CaseLabel> },
    Statement { block: Block },
}

impl DiffKind {
    fn variant(&self) -> u8 {
        match self {
            DiffKind::Context { .. } => 0,
            DiffKind::Role { .. } => 1,
            DiffKind::Element { .. } => 2,
            DiffKind::ForEach { .. } => 3,
            DiffKind::IfChain => 4,
            DiffKind::Branch { .. } => 5,
            DiffKind::Switch { .. } => 6,
            DiffKind::Case { .. } => 7,
            DiffKind::Statement { block } => match block.kind {
                BlockKind::PromptEndsHere { .. } => 8,
                BlockKind::Name(_) => 9,
                BlockKind::Frag(_) => 10,
                BlockKind::Break => 11,
                BlockKind::Continue => 12,
                _ => 13,
            },
        }
    }

    /// Relabel cost: 0 for equal labels, 1 within a kind, `None` across kinds.
    pub fn relabel_cost(&self, other: &DiffKind) -> Option<u32> {
        if self == other {
            Some(0)
        } else if self.variant() == other.variant() {
            Some(1)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiffNode {
    #[serde(flatten)]
    pub kind: DiffKind,
    pub span: Span,
    /// Role of the message this node sits in, for reports.
    #[serde(skip)]
    pub in_role: Option<Role>,
    pub children: Vec<DiffNode>,
}

impl DiffNode {
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(DiffNode::size).sum::<usize>()
    }

    /// One-line description used in reports: `A: resp.reasoning[@t]`.
    pub fn summary(&self) -> String {
        let text = match &self.kind {
            DiffKind::Context { name, params } => {
                let ps: Vec<String> = params
                    .iter()
                    .map(|p| match p {
                        Param::Time(t) => time_ref(t),
                        Param::Plain(i) => i.name.clone(),
                    })
                    .collect();
                return format!("{name}[{}]", ps.join(", "));
            }
            DiffKind::Role { role, single_line: true } => match self.children.first() {
                Some(c) if self.children.len() == 1 => return format!("{role}: {}", c.summary_bare()),
                _ => return format!("{role}:"),
            },
            DiffKind::Role { role, .. } => return format!("{role}: {{...}}"),
            _ => self.summary_bare(),
        };
        match self.in_role {
            Some(r) => format!("{r}: {text}"),
            None => text,
        }
    }

    fn summary_bare(&self) -> String {
        match &self.kind {
            DiffKind::Element { expr } => format_expr(expr),
            DiffKind::ForEach { binder, iterable } => {
                let b = if binder.time { format!("@{}", binder.name) } else { binder.name.clone() };
                format!("ForEach({b}: {})", format_expr(iterable))
            }
            DiffKind::IfChain => match self.children.first() {
                Some(DiffNode { kind: DiffKind::Branch { condition: Some(c) }, .. }) => format!("If {}", format_expr(c)),
                _ => "If".to_string(),
            },
            DiffKind::Branch { condition: Some(c) } => format!("If/ElseIf {}", format_expr(c)),
            DiffKind::Branch { condition: None } => "Else".to_string(),
            DiffKind::Switch { scrutinee } => format!("Switch {}", format_expr(scrutinee)),
            DiffKind::Case { label: Some(l) } => match l {
                CaseLabel::Str(s) => format!("Case \"{s}\""),
                CaseLabel::Ident(s) => format!("Case {s}"),
                CaseLabel::Int(n) => format!("Case {n}"),
            },
            DiffKind::Case { label: None } => "Default".to_string(),
            DiffKind::Statement { block } => block_header(block),
            DiffKind::Context { .. } | DiffKind::Role { .. } => self.summary(),
        }
    }

    pub fn at(&self, path: &[usize]) -> Option<&DiffNode> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => self.children.get(*i)?.at(rest),
        }
    }

    pub fn at_mut(&mut self, path: &[usize]) -> Option<&mut DiffNode> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => self.children.get_mut(*i)?.at_mut(rest),
        }
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a DiffNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }
}

/// Diff tree of a context: comments dropped, `Mark` wrappers unwrapped.
pub fn context_tree(ctx: &ContextDef) -> DiffNode {
    let mut body = ctx.body.clone();
    strip_comments(&mut body);
    let body = unwrap_marks(body);
    DiffNode {
        kind: DiffKind::Context { name: ctx.name.name.clone(), params: ctx.params.clone() },
        span: ctx.span,
        in_role: None,
        children: blocks(&body, None),
    }
}

fn blocks(bs: &[Block], role: Option<Role>) -> Vec<DiffNode> {
    bs.iter().map(|b| block(b, role)).collect()
}

fn node(kind: DiffKind, span: Span, in_role: Option<Role>, children: Vec<DiffNode>) -> DiffNode {
    DiffNode { kind, span, in_role, children }
}

fn block(b: &Block, role: Option<Role>) -> DiffNode {
    match &b.kind {
        BlockKind::Role(r) => node(
            DiffKind::Role { role: r.role, single_line: r.single_line },
            b.span,
            role,
            blocks(&r.body, Some(r.role)),
        ),
        BlockKind::Element(e) => node(DiffKind::Element { expr: e.clone() }, b.span, role, Vec::new()),
        BlockKind::ForEach(f) => node(
            DiffKind::ForEach { binder: f.binder.clone(), iterable: f.iterable.clone() },
            b.span,
            role,
            blocks(&f.body, role),
        ),
        BlockKind::If(chain) => {
            let mut kids: Vec<DiffNode> = chain
                .branches
                .iter()
                .map(|br| {
                    node(DiffKind::Branch { condition: Some(br.condition.clone()) }, br.span, role, blocks(&br.body, role))
                })
                .collect();
            if let Some(body) = &chain.else_body {
                let span = body.first().map(|f| f.span.to(body.last().unwrap().span)).unwrap_or(b.span);
                kids.push(node(DiffKind::Branch { condition: None }, span, role, blocks(body, role)));
            }
            node(DiffKind::IfChain, b.span, role, kids)
        }
        BlockKind::Switch(s) => {
            let mut kids: Vec<DiffNode> = s
                .cases
                .iter()
                .map(|c| node(DiffKind::Case { label: Some(c.label.clone()) }, c.span, role, blocks(&c.body, role)))
                .collect();
            if let Some(body) = &s.default {
                let span = body.first().map(|f| f.span.to(body.last().unwrap().span)).unwrap_or(b.span);
                kids.push(node(DiffKind::Case { label: None }, span, role, blocks(body, role)));
            }
            node(DiffKind::Switch { scrutinee: s.scrutinee.clone() }, b.span, role, kids)
        }
        _ => node(DiffKind::Statement { block: b.clone() }, b.span, role, Vec::new()),
    }
}

/// Rebuilds a context definition from a diff tree.
pub fn to_context(tree: &DiffNode) -> Result<ContextDef, String> {
    let DiffKind::Context { name, params } = &tree.kind else {
        return Err("the root of a diff tree must be a context".into());
    };
    Ok(ContextDef {
        name: Ident::new(name.clone(), Span::default()),
        params: params.clone(),
        body: to_blocks(&tree.children)?,
        span: tree.span,
    })
}

fn to_blocks(nodes: &[DiffNode]) -> Result<Vec<Block>, String> {
    nodes.iter().map(to_block).collect()
}

fn to_block(n: &DiffNode) -> Result<Block, String> {
    let kind = match &n.kind {
        DiffKind::Role { role, single_line } => {
            BlockKind::Role(RoleMessage { role: *role, single_line: *single_line, body: to_blocks(&n.children)? })
        }
        DiffKind::Element { expr } => BlockKind::Element(expr.clone()),
        DiffKind::ForEach { binder, iterable } => BlockKind::ForEach(ForEach {
            binder: binder.clone(),
            iterable: iterable.clone(),
            body: to_blocks(&n.children)?,
        }),
        DiffKind::IfChain => {
            let mut branches = Vec::new();
            let mut else_body = None;
            for c in &n.children {
                match &c.kind {
                    DiffKind::Branch { condition: Some(cond) } => {
                        branches.push(Branch { condition: cond.clone(), body: to_blocks(&c.children)?, span: c.span })
                    }
                    DiffKind::Branch { condition: None } => else_body = Some(to_blocks(&c.children)?),
                    _ => return Err(format!("`{}` cannot sit directly in an If chain", c.summary())),
                }
            }
            if branches.is_empty() {
                return Err("an If chain needs at least one condition".into());
            }
            BlockKind::If(IfChain { branches, else_body })
        }
        DiffKind::Switch { scrutinee } => {
            let mut cases = Vec::new();
            let mut default = None;
            for c in &n.children {
                match &c.kind {
                    DiffKind::Case { label: Some(l) } => {
                        cases.push(Case { label: l.clone(), body: to_blocks(&c.children)?, span: c.span })
                    }
                    DiffKind::Case { label: None } => default = Some(to_blocks(&c.children)?),
                    _ => return Err(format!("`{}` cannot sit directly in a Switch", c.summary())),
                }
            }
            BlockKind::Switch(Switch { scrutinee: scrutinee.clone(), cases, default })
        }
        DiffKind::Statement { block } => return Ok(block.clone()),
        DiffKind::Context { .. } | DiffKind::Branch { .. } | DiffKind::Case { .. } => {
            return Err(format!("`{}` is out of place", n.summary()))
        }
    };
    Ok(Block::new(kind, n.span))
}

/// Header text for a node on its own, without the enclosing role.
pub fn label_text(n: &DiffNode) -> String {
    match &n.kind {
        DiffKind::Statement { block } => format_block(block, 0).trim_end().to_string(),
        _ => n.summary_bare(),
    }
}
