use serde::Serialize;

use crate::expand::{ExpandedPrompt, SlotKind};
use crate::render::theme::Theme;
use crate::syntax::ast::*;
use crate::syntax::format::{block_header, format_block, format_expr};

const MARGIN: f64 = 16.0;
/// Horizontal room reserved per level of mark nesting.
const BRACKET_GUTTER: f64 = 18.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Context,
    Fragment,
    Loop,
    Conditional,
    Branch,
    Switch,
    Case,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TextStyle {
    Content,
    Comment,
    Statement,
    Unresolved,
    Footer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum NodeKind {
    Canvas,
    Frame { kind: FrameKind, label: String },
    Box { role: Role },
    Text { lines: Vec<String>, style: TextStyle },
    Bracket { number: u64 },
    /// `PromptEndsHere`: a horizontal cut line with its condition.
    Divider { label: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    #[serde(flatten)]
    pub kind: NodeKind,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub children: Vec<Node>,
    /// Source byte range of the block this node was drawn from.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<(usize, usize)>,
    /// For brackets before placement: covered child range and nesting depth.
    #[serde(skip)]
    covers: Option<(usize, usize, usize)>,
}

/// Laid-out tree; the root is a `Canvas` node covering the whole drawing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayoutTree {
    pub root: Node,
}

impl Node {
    fn new(kind: NodeKind) -> Node {
        Node { kind, x: 0.0, y: 0.0, w: 0.0, h: 0.0, children: Vec::new(), span: None, covers: None }
    }

    fn with_span(mut self, s: crate::diag::Span) -> Node {
        self.span = Some((s.start, s.end));
        self
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }
}

impl LayoutTree {
    pub fn width(&self) -> f64 {
        self.root.w
    }

    pub fn height(&self) -> f64 {
        self.root.h
    }
}

/// Splits `text` into lines of at most `col` characters; continuation
/// lines start with `↪ `.
pub fn wrap(text: &str, col: usize) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() <= col {
        return vec![text.to_string()];
    }
    let mut out = vec![chars[..col].iter().collect::<String>()];
    let rest = col.saturating_sub(2).max(1);
    for chunk in chars[col..].chunks(rest) {
        out.push(format!("↪ {}", chunk.iter().collect::<String>()));
    }
    out
}

/// A pending bracket: mark number, first and last child index it covers, nesting depth.
struct PendingMark {
    number: u64,
    first: usize,
    end: usize,
    depth: usize,
}

/// Children of a container under construction, with the marks over them.
#[derive(Default)]
struct Flow {
    children: Vec<Node>,
    marks: Vec<PendingMark>,
    depth: usize,
    max_depth: usize,
}

struct Builder<'t> {
    theme: &'t Theme,
}

impl<'t> Builder<'t> {
    fn text(&self, text: &str, style: TextStyle) -> Node {
        let lines = match style {
            TextStyle::Comment => vec![text.to_string()],
            _ => text.lines().flat_map(|l| wrap(l, self.theme.wrap_col)).collect(),
        };
        let lines = if lines.is_empty() { vec![String::new()] } else { lines };
        let mut n = Node::new(NodeKind::Text { lines: Vec::new(), style });
        n.w = lines.iter().map(|l| l.chars().count()).max().unwrap_or(0) as f64 * self.theme.advance();
        n.h = lines.len() as f64 * self.theme.line_height();
        n.kind = NodeKind::Text { lines, style };
        n
    }

    fn label_height(&self, kind: &NodeKind) -> f64 {
        match kind {
            NodeKind::Frame { label, .. } if label.is_empty() => 0.0,
            NodeKind::Frame { .. } | NodeKind::Box { .. } => self.theme.line_height(),
            _ => 0.0,
        }
    }

    fn label_width(&self, kind: &NodeKind) -> f64 {
        match kind {
            NodeKind::Frame { label, .. } => label.chars().count() as f64 * self.theme.advance(),
            NodeKind::Box { .. } => self.theme.advance() * 2.0,
            _ => 0.0,
        }
    }

    /// Sizes a container from its flow; children keep their natural sizes
    /// until `place` stretches them.
    fn container(&self, mut node: Node, flow: Flow) -> Node {
        let pad = self.theme.padding;
        let gutter = flow.max_depth as f64 * BRACKET_GUTTER;
        let inner_w = flow.children.iter().map(|c| c.w).fold(0.0, f64::max).max(self.label_width(&node.kind));
        let mut h = self.label_height(&node.kind) + pad;
        for c in &flow.children {
            h += c.h + self.theme.gap;
        }
        if !flow.children.is_empty() {
            h -= self.theme.gap;
        }
        h += pad;
        node.w = inner_w + 2.0 * pad + gutter;
        node.h = h;
        node.children = flow.children;
        for m in flow.marks {
            let mut b = Node::new(NodeKind::Bracket { number: m.number });
            b.covers = Some((m.first, m.end, m.depth));
            node.children.push(b);
        }
        node
    }

    fn blocks(&self, blocks: &[Block], flow: &mut Flow) {
        for b in blocks {
            self.block(b, flow);
        }
    }

    fn body(&self, node: Node, blocks: &[Block]) -> Node {
        let mut flow = Flow::default();
        self.blocks(blocks, &mut flow);
        self.container(node, flow)
    }

    fn block(&self, b: &Block, flow: &mut Flow) {
        let node = match &b.kind {
            BlockKind::Role(r) => self.body(Node::new(NodeKind::Box { role: r.role }), &r.body),
            BlockKind::ForEach(f) => {
                let label = block_header(b);
                self.body(Node::new(NodeKind::Frame { kind: FrameKind::Loop, label }), &f.body)
            }
            BlockKind::If(chain) if chain.branches.len() == 1 && chain.else_body.is_none() => {
                let label = format!("If {}", format_expr(&chain.branches[0].condition));
                let frame = Node::new(NodeKind::Frame { kind: FrameKind::Conditional, label });
                self.body(frame, &chain.branches[0].body)
            }
            BlockKind::If(chain) => {
                let mut inner = Flow::default();
                for (i, br) in chain.branches.iter().enumerate() {
                    let kw = if i == 0 { "If" } else { "ElseIf" };
                    let label = format!("{kw} {}", format_expr(&br.condition));
                    let frame = Node::new(NodeKind::Frame { kind: FrameKind::Branch, label }).with_span(br.span);
                    inner.children.push(self.body(frame, &br.body));
                }
                if let Some(body) = &chain.else_body {
                    let frame = Node::new(NodeKind::Frame { kind: FrameKind::Branch, label: "Else".into() });
                    inner.children.push(self.body(frame, body));
                }
                let frame = Node::new(NodeKind::Frame { kind: FrameKind::Conditional, label: String::new() });
                self.container(frame, inner)
            }
            BlockKind::Switch(s) => {
                let mut inner = Flow::default();
                for c in &s.cases {
                    let label = match &c.label {
                        CaseLabel::Str(v) => format!("Case \"{v}\""),
                        CaseLabel::Ident(v) => format!("Case {v}"),
                        CaseLabel::Int(v) => format!("Case {v}"),
                    };
                    let frame = Node::new(NodeKind::Frame { kind: FrameKind::Case, label }).with_span(c.span);
                    inner.children.push(self.body(frame, &c.body));
                }
                if let Some(body) = &s.default {
                    let frame = Node::new(NodeKind::Frame { kind: FrameKind::Case, label: "Default".into() });
                    inner.children.push(self.body(frame, body));
                }
                let label = block_header(b);
                self.container(Node::new(NodeKind::Frame { kind: FrameKind::Switch, label }), inner)
            }
            BlockKind::Mark(m) => {
                let first = flow.children.len();
                flow.depth += 1;
                flow.max_depth = flow.max_depth.max(flow.depth);
                let depth = flow.depth;
                self.blocks(&m.body, flow);
                flow.depth -= 1;
                flow.marks.push(PendingMark { number: m.number, first, end: flow.children.len(), depth });
                return;
            }
            BlockKind::PromptEndsHere { condition } => {
                let label = format!("PromptEndsHere when {}", format_expr(condition));
                let mut n = Node::new(NodeKind::Divider { label: label.clone() });
                n.w = label.chars().count() as f64 * self.theme.advance();
                n.h = self.theme.line_height();
                n
            }
            BlockKind::Comment(c) => self.text(&c.text, TextStyle::Comment),
            BlockKind::Element(e) => self.text(&format_expr(e), TextStyle::Content),
            BlockKind::Name(_) | BlockKind::Frag(_) | BlockKind::Break | BlockKind::Continue => {
                self.text(format_block(b, 0).trim_end(), TextStyle::Statement)
            }
        };
        flow.children.push(node.with_span(b.span));
    }

    fn place(&self, n: &mut Node, x: f64, y: f64, w: f64) {
        n.x = x;
        n.y = y;
        n.w = w;
        if matches!(n.kind, NodeKind::Text { .. } | NodeKind::Divider { .. }) {
            return;
        }
        let pad = self.theme.padding;
        let depth = n
            .children
            .iter()
            .filter_map(|c| c.covers.map(|(_, _, d)| d))
            .max()
            .unwrap_or(0);
        let gutter = depth as f64 * BRACKET_GUTTER;
        let inner_w = (w - 2.0 * pad - gutter).max(0.0);
        let mut cy = y + self.label_height(&n.kind) + pad;
        let mut tops = Vec::new();
        for c in n.children.iter_mut().filter(|c| !matches!(c.kind, NodeKind::Bracket { .. })) {
            let cw = match c.kind {
                NodeKind::Text { .. } | NodeKind::Divider { .. } => c.w,
                _ => inner_w,
            };
            self.place(c, x + pad, cy, cw);
            tops.push((cy, cy + c.h));
            cy += c.h + self.theme.gap;
        }
        let right = x + pad + inner_w;
        for c in n.children.iter_mut().filter(|c| matches!(c.kind, NodeKind::Bracket { .. })) {
            let (first, end, depth) = c.covers.expect("brackets record what they cover");
            let (top, bottom) = if first < end {
                (tops[first].0, tops[end - 1].1)
            } else {
                let at = tops.get(first).map_or(cy - self.theme.gap, |t| t.0);
                (at, at)
            };
            c.x = right + 4.0 + (depth - 1) as f64 * BRACKET_GUTTER;
            c.y = top;
            c.w = 6.0;
            c.h = bottom - top;
        }
    }

    fn finish(&self, items: Vec<Node>) -> LayoutTree {
        let mut root = Node::new(NodeKind::Canvas);
        let w = items.iter().map(|c| c.w).fold(0.0, f64::max).max(self.theme.advance() * 8.0);
        let mut y = MARGIN;
        for mut c in items {
            let cw = if matches!(c.kind, NodeKind::Text { .. }) { c.w } else { w };
            self.place(&mut c, MARGIN, y, cw);
            y += c.h + MARGIN;
            root.children.push(c);
        }
        root.w = w + 2.0 * MARGIN;
        root.h = y.max(2.0 * MARGIN);
        LayoutTree { root }
    }
}

fn params_text(ps: &[Param]) -> String {
    let parts: Vec<String> = ps
        .iter()
        .map(|p| match p {
            Param::Time(t) => crate::syntax::format::time_ref(t),
            Param::Plain(i) => i.name.clone(),
        })
        .collect();
    if parts.is_empty() {
        String::new()
    } else {
        format!("[{}]", parts.join(", "))
    }
}

/// Structural view: one titled frame per context and fragment.
pub fn layout_document(doc: &Document, theme: &Theme) -> LayoutTree {
    let bld = Builder { theme };
    let mut items = Vec::new();
    for item in &doc.items {
        match item {
            Item::Context(c) => {
                let label = format!("{}{}", c.name.name, params_text(&c.params));
                let frame = Node::new(NodeKind::Frame { kind: FrameKind::Context, label });
                items.push(bld.body(frame, &c.body).with_span(c.span));
            }
            Item::Fragment(f) => {
                let label = format!("{} {}{}", f.kind.keyword(), f.name.name, params_text(&f.params));
                let frame = Node::new(NodeKind::Frame { kind: FrameKind::Fragment, label });
                items.push(bld.body(frame, &f.body).with_span(f.span));
            }
            Item::Comment(c) => items.push(bld.text(&c.text, TextStyle::Comment)),
        }
    }
    bld.finish(items)
}

/// Structural view of a single context.
pub fn layout_context(ctx: &ContextDef, theme: &Theme) -> LayoutTree {
    layout_document(&Document { items: vec![Item::Context(ctx.clone())] }, theme)
}

/// Instance view: one box per expanded message, marks as brackets.
pub fn layout_expanded(prompt: &ExpandedPrompt, title: &str, theme: &Theme) -> LayoutTree {
    let bld = Builder { theme };
    let mut flow = Flow::default();
    for (i, m) in prompt.messages.iter().enumerate() {
        let mut inner = Flow::default();
        for s in &m.slots {
            let style = if s.kind == SlotKind::Unresolved { TextStyle::Unresolved } else { TextStyle::Content };
            inner.children.push(bld.text(&s.text, style));
        }
        for (d, mk) in prompt.marks.iter().filter(|mk| mk.messages == [i, i + 1] && mk.slots.is_some()).enumerate() {
            let [a, b] = mk.slots.unwrap();
            inner.marks.push(PendingMark { number: mk.number, first: a, end: b, depth: d + 1 });
            inner.max_depth = inner.max_depth.max(d + 1);
        }
        flow.children.push(bld.container(Node::new(NodeKind::Box { role: m.role }), inner));
    }
    for (d, mk) in prompt.marks.iter().filter(|mk| mk.slots.is_none()).enumerate() {
        flow.marks.push(PendingMark { number: mk.number, first: mk.messages[0], end: mk.messages[1], depth: d + 1 });
        flow.max_depth = flow.max_depth.max(d + 1);
    }
    let frame = Node::new(NodeKind::Frame { kind: FrameKind::Context, label: title.to_string() });
    let root = bld.container(frame, flow);
    bld.finish(vec![root])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapping() {
        assert_eq!(wrap("abc", 5), vec!["abc"]);
        assert_eq!(wrap("abcdefghij", 5), vec!["abcde", "↪ fgh", "↪ ij"]);
    }
}
