use std::fs;
use std::path::{Path, PathBuf};

use acdl_core::render::*;
use acdl_core::*;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn doc(rel: &str) -> Document {
    parse(&fs::read_to_string(corpus().join(rel)).unwrap()).0
}

fn context_frame(tree: &LayoutTree) -> &Node {
    tree.root
        .children
        .iter()
        .find(|n| matches!(n.kind, NodeKind::Frame { kind: FrameKind::Context, .. }))
        .unwrap()
}

fn frames(n: &Node, kind: FrameKind) -> Vec<&Node> {
    n.children.iter().filter(|c| matches!(c.kind, NodeKind::Frame { kind: k, .. } if k == kind)).collect()
}

fn boxes(n: &Node) -> Vec<&Node> {
    n.children.iter().filter(|c| matches!(c.kind, NodeKind::Box { .. })).collect()
}

#[test]
fn tool_agent_structure() {
    let tree = layout_document(&doc("listings/tool_agent.acdl"), &Theme::default());
    let ctx = context_frame(&tree);
    assert_eq!(boxes(ctx).len(), 3);
    let cond = frames(ctx, FrameKind::Conditional);
    assert_eq!(cond.len(), 1);
    let loops = frames(cond[0], FrameKind::Loop);
    assert_eq!(loops.len(), 1);
    let inner = frames(loops[0], FrameKind::Conditional);
    assert_eq!(inner.len(), 1);
    assert_eq!(frames(inner[0], FrameKind::Branch).len(), 2);
}

#[test]
fn tool_agent_role_fills() {
    let theme = Theme::default();
    let svg = render_document(&doc("listings/tool_agent.acdl"), &theme);
    let count = |role: &str| {
        let fill = format!("fill=\"{}\"", theme.roles[role].fill);
        svg.lines().filter(|l| l.starts_with("<rect") && l.contains(&fill)).count()
    };
    let tree = layout_document(&doc("listings/tool_agent.acdl"), &theme);
    let ctx = context_frame(&tree);
    let top_s = boxes(ctx).iter().filter(|b| matches!(b.kind, NodeKind::Box { role: Role::S })).count();
    assert_eq!(top_s, 2);
    assert_eq!(count("S"), 2);
    assert_eq!(count("U"), 2);
    assert_eq!(count("A"), 1);
}

#[test]
fn empty_context_is_a_titled_frame() {
    let (d, _) = parse("Empty[@T]: {\n}\n");
    let tree = layout_document(&d, &Theme::default());
    let ctx = context_frame(&tree);
    assert!(ctx.children.is_empty());
    assert!(matches!(&ctx.kind, NodeKind::Frame { label, .. } if label == "Empty[@T]"));
    assert!(render_svg(&tree, &Theme::default()).contains(">Empty[@T]</text>"));
}

#[test]
fn mark_brackets_span_their_blocks() {
    let tree = layout_document(&doc("listings/mark_blocks.acdl"), &Theme::default());
    let ctx = context_frame(&tree);
    let blocks: Vec<&Node> = ctx.children.iter().filter(|c| !matches!(c.kind, NodeKind::Bracket { .. })).collect();
    let brackets: Vec<&Node> = ctx.children.iter().filter(|c| matches!(c.kind, NodeKind::Bracket { .. })).collect();
    assert_eq!(brackets.len(), 3);
    assert!(matches!(blocks[0].kind, NodeKind::Box { role: Role::S }));
    assert!(matches!(blocks[1].kind, NodeKind::Frame { kind: FrameKind::Loop, .. }));
    assert!(matches!(blocks[2].kind, NodeKind::Box { role: Role::U }));
    for (i, b) in brackets.iter().enumerate() {
        assert!(matches!(b.kind, NodeKind::Bracket { number } if number == i as u64 + 1));
        assert_eq!((b.y, b.y + b.h), (blocks[i].y, blocks[i].y + blocks[i].h));
        assert!(b.x >= blocks[i].x + blocks[i].w, "bracket sits right of the marked extent");
        assert!(b.x + b.w <= ctx.x + ctx.w);
    }
}

fn check_geometry(n: &Node, path: &str) {
    let eps = 1e-6;
    let placed: Vec<&Node> = n.children.iter().filter(|c| !matches!(c.kind, NodeKind::Bracket { .. })).collect();
    for c in &n.children {
        if matches!(n.kind, NodeKind::Canvas) {
            break;
        }
        assert!(c.x + eps >= n.x && c.y + eps >= n.y, "{path}: child escapes at top-left");
        assert!(c.x + c.w <= n.x + n.w + eps && c.y + c.h <= n.y + n.h + eps, "{path}: child escapes {c:?}");
    }
    for w in placed.windows(2) {
        assert!(w[0].y + w[0].h <= w[1].y + eps, "{path}: siblings overlap or are out of order");
    }
    for (i, c) in n.children.iter().enumerate() {
        check_geometry(c, &format!("{path}/{i}"));
    }
}

fn sources() -> Vec<(String, String)> {
    let mut out = Vec::new();
    for dir in ["listings", "fixtures", "diff"] {
        let mut files: Vec<PathBuf> = fs::read_dir(corpus().join(dir)).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        for f in files.into_iter().filter(|p| p.extension().is_some_and(|e| e == "acdl")) {
            let name = format!("{dir}_{}", f.file_stem().unwrap().to_str().unwrap());
            out.push((name, fs::read_to_string(&f).unwrap()));
        }
    }
    out
}

#[test]
fn layout_geometry_invariants() {
    for (name, src) in sources() {
        let tree = layout_document(&parse(&src).0, &Theme::default());
        check_geometry(&tree.root, &name);
    }
}

#[test]
fn box_order_follows_source_order() {
    for (name, src) in sources() {
        let d = parse(&src).0;
        let tree = layout_document(&d, &Theme::default());
        let mut from_tree = Vec::new();
        tree.root.walk(&mut |n| {
            if let NodeKind::Box { role } = n.kind {
                from_tree.push((n.span.unwrap().0, role));
            }
        });
        let mut from_ast = Vec::new();
        for item in &d.items {
            let body = match item {
                Item::Context(c) => &c.body,
                Item::Fragment(f) => &f.body,
                Item::Comment(_) => continue,
            };
            walk_blocks(body, &mut |b| {
                if let BlockKind::Role(r) = &b.kind {
                    from_ast.push((b.span.start, r.role));
                }
            });
        }
        assert_eq!(from_tree, from_ast, "{name}");
    }
}

#[test]
fn every_comment_is_one_muted_run() {
    for (name, src) in sources() {
        let d = parse(&src).0;
        let svg = render_document(&d, &Theme::default());
        let runs = svg.matches("data-style=\"comment\"").count();
        assert_eq!(runs, comment_texts(&d).len(), "{name}");
    }
}

#[test]
fn expanded_view_marks_cover_their_messages() {
    let src = fs::read_to_string(corpus().join("listings/mark_blocks.acdl")).unwrap();
    let (d, _) = parse(&src);
    let ctx = resolve(&d, "Prompt").0.unwrap();
    let (p, _) = expand(&ctx, &EnvironmentDocument::at(&[3]));
    let tree = layout_expanded(&p, "Prompt @ [3]", &Theme::default());
    let frame = context_frame(&tree);
    let bx = boxes(frame);
    assert_eq!(bx.len(), p.messages.len());
    for b in frame.children.iter().filter(|c| matches!(c.kind, NodeKind::Bracket { .. })) {
        let NodeKind::Bracket { number } = b.kind else { unreachable!() };
        let mk = p.marks.iter().find(|m| m.number == number).unwrap();
        let [s, e] = mk.messages;
        assert_eq!(b.y, bx[s].y);
        assert_eq!(b.y + b.h, bx[e - 1].y + bx[e - 1].h);
    }
}

#[test]
fn rendering_is_deterministic() {
    let theme = Theme::default();
    let run = || sources().iter().map(|(_, s)| render_document(&parse(s).0, &theme)).collect::<Vec<_>>();
    let a = run();
    assert_eq!(a, run());
    assert_eq!(a, run());
}

#[test]
fn svg_is_well_formed() {
    for (name, src) in sources() {
        let svg = render_document(&parse(&src).0, &Theme::default());
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        let opens = svg.matches("<text").count();
        assert_eq!(opens, svg.matches("</text>").count(), "{name}");
        assert!(!svg.contains("NaN") && !svg.contains("inf"), "{name}");
    }
}

#[test]
fn theme_colors_apply() {
    let theme = Theme::from_json(r##"{"roles":{"S":{"fill":"#123456","stroke":"#654321"}}}"##).unwrap();
    let svg = render_document(&doc("listings/tool_agent.acdl"), &theme);
    assert!(svg.contains("fill=\"#123456\""));
    assert!(!svg.contains("#fde68a"));
}

#[test]
fn long_lines_wrap() {
    let (d, _) = parse("P[@T]: {\n  U: {\n    \"a fairly long literal that certainly exceeds the configured wrap column\"\n  }\n}\n");
    let svg = render_document(&d, &Theme::default());
    assert!(svg.contains("<tspan"));
    assert!(svg.contains("↪ "));
}

#[test]
fn goldens() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let update = std::env::var_os("ACDL_UPDATE_GOLDENS").is_some();
    let theme = Theme::default();
    for (name, src) in sources() {
        let svg = render_document(&parse(&src).0, &theme);
        let path = dir.join(format!("{name}.svg"));
        if update {
            fs::create_dir_all(&dir).unwrap();
            fs::write(&path, &svg).unwrap();
        } else {
            let want = fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden {}", path.display()));
            assert_eq!(svg, want, "{name} differs from its golden");
        }
    }
}
