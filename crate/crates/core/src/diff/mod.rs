//! Structural diff between two contexts.
//!
//! Trees are compared top-down: a node can only be matched with a node of
//! the same kind whose parent it is matched with, and insertions and
//! deletions take whole subtrees. Under that model the minimum-cost script
//! is found exactly by nested sequence alignment. Deleted and inserted
//! subtrees that are identical are then paired up into moves.

pub mod tree;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::diag::Span;
use crate::render::{layout_context, render_svg_annotated, Annotations, Theme};
use crate::syntax::ast::*;

pub use tree::{context_tree, to_context, DiffKind, DiffNode};

pub const MOVE_COST: u32 = 2;

pub type Path = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "edit")]
pub enum Edit {
    Insert {
        /// Position in B.
        path: Path,
        node: String,
        size: usize,
        #[serde(serialize_with = "span_pair")]
        span: Span,
        #[serde(skip)]
        subtree: DiffNode,
    },
    Delete {
        /// Position in A.
        path: Path,
        node: String,
        size: usize,
        #[serde(serialize_with = "span_pair")]
        span: Span,
    },
    ReplaceRole {
        path: Path,
        path_b: Path,
        old_role: Role,
        new_role: Role,
        node: String,
        #[serde(serialize_with = "span_pair")]
        span_a: Span,
        #[serde(serialize_with = "span_pair")]
        span_b: Span,
    },
    ModifyContent {
        path: Path,
        path_b: Path,
        old: String,
        new: String,
        #[serde(serialize_with = "span_pair")]
        span_a: Span,
        #[serde(serialize_with = "span_pair")]
        span_b: Span,
        #[serde(skip)]
        kind: DiffKind,
    },
    Move {
        from: Path,
        to: Path,
        node: String,
        size: usize,
        #[serde(serialize_with = "span_pair")]
        span_a: Span,
        #[serde(serialize_with = "span_pair")]
        span_b: Span,
    },
}

fn span_pair<S: serde::Serializer>(s: &Span, ser: S) -> Result<S::Ok, S::Error> {
    [s.start, s.end].serialize(ser)
}

impl Edit {
    pub fn cost(&self) -> u32 {
        match self {
            Edit::Insert { size, .. } | Edit::Delete { size, .. } => *size as u32,
            Edit::ReplaceRole { .. } | Edit::ModifyContent { .. } => 1,
            Edit::Move { .. } => MOVE_COST,
        }
    }

    pub fn to_line(&self) -> String {
        let sp = |s: &Span| format!("[{}..{}]", s.start, s.end);
        match self {
            Edit::Insert { node, span, .. } => format!("+ {node} {}", sp(span)),
            Edit::Delete { node, span, .. } => format!("- {node} {}", sp(span)),
            Edit::ReplaceRole { old_role, new_role, node, span_a, span_b, .. } => {
                format!("~ role {old_role} -> {new_role}: {node} {} -> {}", sp(span_a), sp(span_b))
            }
            Edit::ModifyContent { old, new, span_a, span_b, .. } => {
                format!("~ {old} -> {new} {} -> {}", sp(span_a), sp(span_b))
            }
            Edit::Move { node, span_a, span_b, .. } => format!("> {node} {} -> {}", sp(span_a), sp(span_b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkChangeKind {
    Added,
    Removed,
    Changed,
}

/// A `Mark` that appears, disappears, or covers a different number of
/// blocks. Marks never cost anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarkChange {
    pub number: u64,
    pub change: MarkChangeKind,
    pub before: Vec<String>,
    pub after: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CommentChanges {
    pub removed: Vec<String>,
    pub added: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffReport {
    pub edits: Vec<Edit>,
    /// Cost of the script, moves included.
    pub cost: u32,
    /// Minimum cost without moves.
    pub distance: u32,
    pub marks: Vec<MarkChange>,
    pub comments: CommentChanges,
}

impl DiffReport {
    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }
}

/// Arena-free alignment over two trees with a memo keyed by pre-order ids.
struct Aligner<'a> {
    a: Vec<&'a DiffNode>,
    b: Vec<&'a DiffNode>,
    a_kids: Vec<Vec<usize>>,
    b_kids: Vec<Vec<usize>>,
    a_size: Vec<u32>,
    b_size: Vec<u32>,
    memo: BTreeMap<(usize, usize), Option<u32>>,
}

fn index<'a>(n: &'a DiffNode, nodes: &mut Vec<&'a DiffNode>, kids: &mut Vec<Vec<usize>>, sizes: &mut Vec<u32>) -> usize {
    let id = nodes.len();
    nodes.push(n);
    kids.push(Vec::new());
    sizes.push(0);
    let mut size = 1;
    for c in &n.children {
        let cid = index(c, nodes, kids, sizes);
        size += sizes[cid];
        kids[id].push(cid);
    }
    sizes[id] = size;
    id
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Step {
    Match,
    Delete,
    Insert,
}

impl<'a> Aligner<'a> {
    fn new(a: &'a DiffNode, b: &'a DiffNode) -> Self {
        let mut s = Aligner {
            a: Vec::new(),
            b: Vec::new(),
            a_kids: Vec::new(),
            b_kids: Vec::new(),
            a_size: Vec::new(),
            b_size: Vec::new(),
            memo: BTreeMap::new(),
        };
        index(a, &mut s.a, &mut s.a_kids, &mut s.a_size);
        index(b, &mut s.b, &mut s.b_kids, &mut s.b_size);
        s
    }

    /// Cost of turning subtree `i` of A into subtree `j` of B with the roots matched.
    fn dist(&mut self, i: usize, j: usize) -> Option<u32> {
        if let Some(d) = self.memo.get(&(i, j)) {
            return *d;
        }
        let d = self.a[i].kind.relabel_cost(&self.b[j].kind).map(|r| {
            let (ka, kb) = (self.a_kids[i].clone(), self.b_kids[j].clone());
            r + self.table(&ka, &kb)[ka.len()][kb.len()]
        });
        self.memo.insert((i, j), d);
        d
    }

    fn table(&mut self, ka: &[usize], kb: &[usize]) -> Vec<Vec<u32>> {
        let mut t = vec![vec![0u32; kb.len() + 1]; ka.len() + 1];
        for p in 1..=ka.len() {
            t[p][0] = t[p - 1][0] + self.a_size[ka[p - 1]];
        }
        for q in 1..=kb.len() {
            t[0][q] = t[0][q - 1] + self.b_size[kb[q - 1]];
        }
        for p in 1..=ka.len() {
            for q in 1..=kb.len() {
                let del = t[p - 1][q] + self.a_size[ka[p - 1]];
                let ins = t[p][q - 1] + self.b_size[kb[q - 1]];
                let mut best = del.min(ins);
                if let Some(d) = self.dist(ka[p - 1], kb[q - 1]) {
                    best = best.min(t[p - 1][q - 1] + d);
                }
                t[p][q] = best;
            }
        }
        t
    }

    /// Alignment steps for two child lists, in order.
    fn steps(&mut self, ka: &[usize], kb: &[usize]) -> Vec<Step> {
        let t = self.table(ka, kb);
        let (mut p, mut q) = (ka.len(), kb.len());
        let mut out = Vec::new();
        while p > 0 || q > 0 {
            if p > 0 && q > 0 {
                if let Some(d) = self.dist(ka[p - 1], kb[q - 1]) {
                    if t[p][q] == t[p - 1][q - 1] + d {
                        out.push(Step::Match);
                        p -= 1;
                        q -= 1;
                        continue;
                    }
                }
            }
            if p > 0 && t[p][q] == t[p - 1][q] + self.a_size[ka[p - 1]] {
                out.push(Step::Delete);
                p -= 1;
            } else {
                out.push(Step::Insert);
                q -= 1;
            }
        }
        out.reverse();
        out
    }

    fn script(&mut self, i: usize, j: usize, pa: &mut Path, pb: &mut Path, out: &mut Vec<Edit>) {
        let (na, nb) = (self.a[i], self.b[j]);
        if na.kind != nb.kind {
            match (&na.kind, &nb.kind) {
                (DiffKind::Role { role: ra, single_line: sa }, DiffKind::Role { role: rb, single_line: sb })
                    if sa == sb =>
                {
                    out.push(Edit::ReplaceRole {
                        path: pa.clone(),
                        path_b: pb.clone(),
                        old_role: *ra,
                        new_role: *rb,
                        node: na.summary(),
                        span_a: na.span,
                        span_b: nb.span,
                    })
                }
                _ => out.push(Edit::ModifyContent {
                    path: pa.clone(),
                    path_b: pb.clone(),
                    old: na.summary(),
                    new: nb.summary(),
                    span_a: na.span,
                    span_b: nb.span,
                    kind: nb.kind.clone(),
                }),
            }
        }
        let (ka, kb) = (self.a_kids[i].clone(), self.b_kids[j].clone());
        let (mut p, mut q) = (0, 0);
        for step in self.steps(&ka, &kb) {
            match step {
                Step::Match => {
                    pa.push(p);
                    pb.push(q);
                    self.script(ka[p], kb[q], pa, pb, out);
                    pa.pop();
                    pb.pop();
                    p += 1;
                    q += 1;
                }
                Step::Delete => {
                    let n = self.a[ka[p]];
                    let mut path = pa.clone();
                    path.push(p);
                    out.push(Edit::Delete { path, node: n.summary(), size: n.size(), span: n.span });
                    p += 1;
                }
                Step::Insert => {
                    let n = self.b[kb[q]];
                    let mut path = pb.clone();
                    path.push(q);
                    out.push(Edit::Insert { path, node: n.summary(), size: n.size(), span: n.span, subtree: n.clone() });
                    q += 1;
                }
            }
        }
    }
}

/// Replaces delete/insert pairs of identical subtrees (size ≥ 2) by moves.
fn pair_moves(edits: Vec<Edit>, a: &DiffNode) -> Vec<Edit> {
    let mut edits: Vec<Option<Edit>> = edits.into_iter().map(Some).collect();
    let mut moves = Vec::new();
    for di in 0..edits.len() {
        let Some(Edit::Delete { path, size, span, node }) = edits[di].clone() else { continue };
        if size < 2 {
            continue;
        }
        let Some(deleted) = a.at(&path) else { continue };
        let found = edits.iter().position(|e| matches!(e, Some(Edit::Insert { subtree, .. }) if subtree == deleted));
        if let Some(ii) = found {
            let Some(Edit::Insert { path: to, span: span_b, .. }) = edits[ii].take() else { unreachable!() };
            edits[di] = None;
            moves.push((di.min(ii), Edit::Move { from: path, to, node, size, span_a: span, span_b }));
        }
    }
    let mut out: Vec<(usize, Edit)> = edits.into_iter().enumerate().filter_map(|(i, e)| e.map(|e| (i, e))).collect();
    out.extend(moves);
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, e)| e).collect()
}

fn marks_of(ctx: &ContextDef) -> BTreeMap<u64, Vec<String>> {
    let mut body = ctx.body.clone();
    strip_comments(&mut body);
    let mut out: BTreeMap<u64, Vec<String>> = BTreeMap::new();
    walk_blocks(&body, &mut |b| {
        if let BlockKind::Mark(m) = &b.kind {
            let covered = unwrap_marks(m.body.clone());
            let tree = context_tree(&ContextDef { body: covered, ..ctx.clone() });
            out.entry(m.number).or_default().extend(tree.children.iter().map(DiffNode::summary));
        }
    });
    out
}

fn mark_changes(a: &ContextDef, b: &ContextDef) -> Vec<MarkChange> {
    let (ma, mb) = (marks_of(a), marks_of(b));
    let mut numbers: Vec<u64> = ma.keys().chain(mb.keys()).copied().collect();
    numbers.sort_unstable();
    numbers.dedup();
    numbers
        .into_iter()
        .filter_map(|n| {
            let (before, after) = (ma.get(&n).cloned(), mb.get(&n).cloned());
            let change = match (&before, &after) {
                (Some(x), Some(y)) if x.len() == y.len() => return None,
                (Some(_), Some(_)) => MarkChangeKind::Changed,
                (Some(_), None) => MarkChangeKind::Removed,
                _ => MarkChangeKind::Added,
            };
            Some(MarkChange { number: n, change, before: before.unwrap_or_default(), after: after.unwrap_or_default() })
        })
        .collect()
}

fn comments_of(ctx: &ContextDef) -> Vec<String> {
    let mut out = Vec::new();
    walk_blocks(&ctx.body, &mut |b| {
        if let BlockKind::Comment(c) = &b.kind {
            out.push(c.text.clone());
        }
    });
    out
}

fn comment_changes(a: &ContextDef, b: &ContextDef) -> CommentChanges {
    let (ca, cb) = (comments_of(a), comments_of(b));
    let mut pool = cb.clone();
    let mut removed = Vec::new();
    for c in ca.iter() {
        match pool.iter().position(|x| x == c) {
            Some(i) => {
                pool.remove(i);
            }
            None => removed.push(c.clone()),
        }
    }
    let mut pool = ca;
    let mut added = Vec::new();
    for c in cb {
        match pool.iter().position(|x| *x == c) {
            Some(i) => {
                pool.remove(i);
            }
            None => added.push(c),
        }
    }
    CommentChanges { removed, added }
}

pub fn diff(a: &ContextDef, b: &ContextDef) -> DiffReport {
    let (ta, tb) = (context_tree(a), context_tree(b));
    let mut al = Aligner::new(&ta, &tb);
    let distance = al.dist(0, 0).expect("context roots always align");
    let mut edits = Vec::new();
    al.script(0, 0, &mut Vec::new(), &mut Vec::new(), &mut edits);
    let edits = pair_moves(edits, &ta);
    let cost = edits.iter().map(Edit::cost).sum();
    DiffReport { edits, cost, distance, marks: mark_changes(a, b), comments: comment_changes(a, b) }
}

#[derive(Debug, thiserror::Error)]
#[error("cannot apply edit script: {0}")]
pub struct ApplyError(pub String);

/// Applies a script produced by [`diff`] to `a`. The result equals `b` up
/// to comments and `Mark` wrappers.
pub fn apply(edits: &[Edit], a: &ContextDef) -> Result<ContextDef, ApplyError> {
    let mut tree = context_tree(a);
    let missing = |p: &Path| ApplyError(format!("no node at path {p:?}"));
    for e in edits {
        match e {
            Edit::ReplaceRole { path, new_role, .. } => {
                let n = tree.at_mut(path).ok_or_else(|| missing(path))?;
                match &mut n.kind {
                    DiffKind::Role { role, .. } => *role = *new_role,
                    _ => return Err(ApplyError(format!("node at {path:?} is not a role message"))),
                }
            }
            Edit::ModifyContent { path, kind, .. } => {
                tree.at_mut(path).ok_or_else(|| missing(path))?.kind = kind.clone();
            }
            _ => {}
        }
    }
    let mut removals: Vec<(&Path, Option<usize>)> = Vec::new();
    let mut moves: Vec<(Path, Path)> = Vec::new();
    for e in edits {
        match e {
            Edit::Delete { path, .. } => removals.push((path, None)),
            Edit::Move { from, to, .. } => {
                removals.push((from, Some(moves.len())));
                moves.push((from.clone(), to.clone()));
            }
            _ => {}
        }
    }
    removals.sort_by(|x, y| y.0.cmp(x.0));
    let mut moved: Vec<Option<DiffNode>> = vec![None; moves.len()];
    for (path, slot) in removals {
        let (last, parent) = path.split_last().ok_or_else(|| ApplyError("cannot delete the root".into()))?;
        let parent = tree.at_mut(parent).ok_or_else(|| missing(path))?;
        if *last >= parent.children.len() {
            return Err(missing(path));
        }
        let node = parent.children.remove(*last);
        if let Some(k) = slot {
            moved[k] = Some(node);
        }
    }
    let mut inserts: Vec<(&Path, DiffNode)> = Vec::new();
    for e in edits {
        if let Edit::Insert { path, subtree, .. } = e {
            inserts.push((path, subtree.clone()));
        }
    }
    for (k, (_, to)) in moves.iter().enumerate() {
        inserts.push((to, moved[k].take().expect("every move removed its source")));
    }
    inserts.sort_by(|x, y| x.0.cmp(y.0));
    for (path, node) in inserts {
        let (last, parent) = path.split_last().ok_or_else(|| ApplyError("cannot insert a root".into()))?;
        let parent = tree.at_mut(parent).ok_or_else(|| missing(path))?;
        if *last > parent.children.len() {
            return Err(missing(path));
        }
        parent.children.insert(*last, node);
    }
    to_context(&tree).map_err(ApplyError)
}

/// Plain-text report, one edit per line.
pub fn format_diff(report: &DiffReport, with_comments: bool) -> String {
    let mut out = String::new();
    if report.edits.is_empty() {
        out.push_str("no structural differences\n");
    }
    for e in &report.edits {
        out.push_str(&e.to_line());
        out.push('\n');
    }
    for m in &report.marks {
        let what = match m.change {
            MarkChangeKind::Added => "added",
            MarkChangeKind::Removed => "removed",
            MarkChangeKind::Changed => "changed",
        };
        out.push_str(&format!("mark {} {what} (cost 0)\n", m.number));
    }
    if with_comments {
        for c in &report.comments.removed {
            out.push_str(&format!("comment removed: {c}\n"));
        }
        for c in &report.comments.added {
            out.push_str(&format!("comment added: {c}\n"));
        }
    }
    out
}

/// B's structural rendering with inserted and changed nodes outlined and
/// deleted nodes listed under the drawing.
pub fn diff_svg(report: &DiffReport, b: &ContextDef, theme: &Theme) -> String {
    let mut notes = Annotations::default();
    for e in &report.edits {
        match e {
            Edit::Insert { span, .. } => {
                notes.inserted.insert((span.start, span.end));
            }
            Edit::Move { span_b, .. } | Edit::ReplaceRole { span_b, .. } | Edit::ModifyContent { span_b, .. } => {
                notes.changed.insert((span_b.start, span_b.end));
            }
            Edit::Delete { node, span, .. } => notes.footer.push(format!("- {node} [{}..{}]", span.start, span.end)),
        }
    }
    render_svg_annotated(&layout_context(b, theme), theme, &notes)
}

/// The comparison form used by [`apply`]: comments removed, marks unwrapped.
pub fn normalized(ctx: &ContextDef) -> ContextDef {
    to_context(&context_tree(ctx)).expect("trees built from contexts convert back")
}
