use std::fs;
use std::path::{Path, PathBuf};

use acdl_core::diag::{codes, has_errors, Severity};
use acdl_core::syntax::ast::*;
use acdl_core::*;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn acdl_files(dir: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(corpus().join(dir))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "acdl"))
        .collect();
    v.sort();
    v
}

fn valid_sources() -> Vec<(PathBuf, String)> {
    ["listings", "fixtures", "diff"]
        .iter()
        .flat_map(|d| acdl_files(d))
        .map(|p| {
            let s = fs::read_to_string(&p).unwrap();
            (p, s)
        })
        .collect()
}

#[test]
fn listings_parse_without_errors() {
    let start = std::time::Instant::now();
    for (path, src) in valid_sources() {
        let (_, diags) = check(&src, ValidateOptions::default());
        assert!(!has_errors(&diags), "{}: {diags:#?}", path.display());
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn nested_role_listing_is_rejected() {
    let src = fs::read_to_string(corpus().join("invalid/nested_role.acdl")).unwrap();
    let (_, diags) = check(&src, ValidateOptions::default());
    let errors: Vec<&str> = diags.iter().filter(|d| d.is_error()).map(|d| d.code).collect();
    assert_eq!(errors, vec![codes::NESTED_ROLE]);
}

#[test]
fn format_round_trips() {
    for (path, src) in valid_sources() {
        let (doc, _) = parse(&src);
        let once = format(&doc);
        let (again, diags) = parse(&once);
        assert!(diags.is_empty() || !has_errors(&diags), "{}: {diags:#?}", path.display());
        assert_eq!(doc, again, "{}", path.display());
        assert_eq!(format(&again), once, "{}: fmt is not byte-stable", path.display());
    }
}

#[test]
fn formatting_keeps_every_comment() {
    for (path, src) in valid_sources() {
        let (doc, _) = parse(&src);
        let (again, _) = parse(&format(&doc));
        let mut a = comment_texts(&doc);
        let mut b = comment_texts(&again);
        a.sort();
        b.sort();
        assert_eq!(a, b, "{}", path.display());
        let raw = src.matches("//").count();
        assert_eq!(a.len(), raw, "{}: comment count", path.display());
    }
}

fn line_col(src: &str, offset: usize) -> (u32, u32) {
    let before = &src[..offset];
    let line = before.matches('\n').count() as u32 + 1;
    let col = before.rsplit('\n').next().unwrap().chars().count() as u32 + 1;
    (line, col)
}

fn check_span(src: &str, s: Span, parent: Span, what: &str) {
    assert!(s.start <= s.end && s.end <= src.len(), "{what}: {s:?} outside source");
    assert!(parent.start <= s.start && s.end <= parent.end, "{what}: {s:?} escapes parent {parent:?}");
    assert_eq!(line_col(src, s.start), (s.line, s.col), "{what}: line/col of {s:?}");
}

fn check_expr(src: &str, e: &Expr, parent: Span) {
    check_span(src, e.span, parent, "expr");
    for sub in sub_exprs(e) {
        check_expr(src, sub, e.span);
    }
}

fn check_blocks(src: &str, blocks: &[Block], parent: Span) {
    for b in blocks {
        check_span(src, b.span, parent, "block");
        for e in block_exprs(b) {
            check_expr(src, e, b.span);
        }
        for list in child_lists(b) {
            check_blocks(src, list, b.span);
        }
    }
}

#[test]
fn spans_are_sound() {
    for (_, src) in valid_sources() {
        let (doc, _) = parse(&src);
        let whole = Span::new(0, src.len(), 1, 1);
        for item in &doc.items {
            match item {
                Item::Context(c) => {
                    check_span(&src, c.span, whole, "context");
                    check_blocks(&src, &c.body, c.span);
                }
                Item::Fragment(f) => {
                    check_span(&src, f.span, whole, "fragment");
                    check_blocks(&src, &f.body, f.span);
                }
                Item::Comment(_) => {}
            }
        }
    }
}

#[test]
fn scoping_rules() {
    let files = acdl_files("scoping");
    assert_eq!(files.len(), 20);
    for path in files {
        let src = fs::read_to_string(&path).unwrap();
        let name = path.file_name().unwrap().to_str().unwrap();
        let (_, diags) = check(&src, ValidateOptions::default());
        let found: Vec<&str> =
            diags.iter().filter(|d| d.severity != Severity::Info).map(|d| d.code).collect();
        if name.contains(".violating.") {
            let want = src.lines().next().unwrap().trim_start_matches("// expect:").trim();
            assert_eq!(found, vec![want], "{name}: {diags:#?}");
        } else {
            assert!(found.is_empty(), "{name}: {diags:#?}");
        }
    }
}

#[test]
fn every_context_resolves() {
    for (path, src) in valid_sources() {
        let (doc, _) = parse(&src);
        for c in doc.contexts() {
            let (ctx, diags) = resolve(&doc, &c.name.name);
            assert!(ctx.is_some() && !has_errors(&diags), "{} {}: {diags:#?}", path.display(), c.name.name);
        }
    }
}
