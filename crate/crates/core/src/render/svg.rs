use std::collections::BTreeSet;
use std::fmt::Write;

use crate::render::layout::{FrameKind, LayoutTree, Node, NodeKind, TextStyle};
use crate::render::theme::Theme;

/// Extra styling for diff output: nodes whose source span is listed get a
/// colored outline, and footer lines are printed under the drawing.
#[derive(Debug, Clone, Default)]
pub struct Annotations {
    pub changed: BTreeSet<(usize, usize)>,
    pub inserted: BTreeSet<(usize, usize)>,
    pub footer: Vec<String>,
}

/// Shortest decimal form with at most two fractional digits.
pub fn num(v: f64) -> String {
    let s = format!("{:.2}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && c != '\t' => {}
            c => out.push(c),
        }
    }
    out
}

pub fn render_svg(tree: &LayoutTree, theme: &Theme) -> String {
    render_svg_annotated(tree, theme, &Annotations::default())
}

pub fn render_svg_annotated(tree: &LayoutTree, theme: &Theme, notes: &Annotations) -> String {
    let lh = theme.line_height();
    let footer_h = if notes.footer.is_empty() { 0.0 } else { (notes.footer.len() as f64 + 1.0) * lh };
    let w = tree.width();
    let h = tree.height() + footer_h;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" font-family=\"monospace\" font-size=\"{}\">",
        num(w),
        num(h),
        num(w),
        num(h),
        num(theme.font_size)
    );
    let _ = writeln!(out, "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"{}\"/>", num(w), num(h), theme.background);
    let mut r = Renderer { theme, notes, out };
    for c in &tree.root.children {
        r.node(c);
    }
    if !notes.footer.is_empty() {
        let mut y = tree.height() + lh * 0.75;
        for line in &notes.footer {
            let _ = writeln!(
                r.out,
                "<text x=\"16\" y=\"{}\" fill=\"{}\" data-diff=\"deleted\">{}</text>",
                num(y),
                theme.changed_stroke,
                escape(line)
            );
            y += lh;
        }
    }
    r.out.push_str("</svg>\n");
    r.out
}

struct Renderer<'a> {
    theme: &'a Theme,
    notes: &'a Annotations,
    out: String,
}

impl<'a> Renderer<'a> {
    fn diff_attrs(&self, n: &Node) -> Option<(&'static str, &'a str)> {
        let span = n.span?;
        if self.notes.inserted.contains(&span) {
            Some(("inserted", &self.theme.inserted_stroke))
        } else if self.notes.changed.contains(&span) {
            Some(("changed", &self.theme.changed_stroke))
        } else {
            None
        }
    }

    fn text_line(&mut self, x: f64, baseline: f64, text: &str, attrs: &str) {
        let _ = writeln!(self.out, "<text x=\"{}\" y=\"{}\"{attrs}>{}</text>", num(x), num(baseline), escape(text));
    }

    fn node(&mut self, n: &Node) {
        let t = self.theme;
        let lh = t.line_height();
        let base = lh * 0.72;
        let diff = self.diff_attrs(n);
        match &n.kind {
            NodeKind::Canvas => {}
            NodeKind::Box { role } => {
                let style = t.role(*role);
                let (stroke, width, mark) = match diff {
                    Some((kind, color)) => (color, 2.5, format!(" data-diff=\"{kind}\"")),
                    None => (style.stroke.as_str(), 1.0, String::new()),
                };
                let _ = writeln!(
                    self.out,
                    "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" rx=\"4\" fill=\"{}\" stroke=\"{}\" stroke-width=\"{}\" data-role=\"{}\"{mark}/>",
                    num(n.x),
                    num(n.y),
                    num(n.w),
                    num(n.h),
                    style.fill,
                    stroke,
                    num(width),
                    role.letter()
                );
                let attrs = format!(" font-weight=\"bold\" fill=\"{}\"", style.stroke);
                self.text_line(n.x + t.padding, n.y + base + t.padding * 0.5, role.letter(), &attrs);
            }
            NodeKind::Frame { kind, label } => {
                let (stroke, width, mark) = match diff {
                    Some((k, color)) => (color, 2.0, format!(" data-diff=\"{k}\"")),
                    None => (t.frame_stroke.as_str(), 1.0, String::new()),
                };
                let rx = if *kind == FrameKind::Context { 2 } else { 8 };
                let dash = if matches!(kind, FrameKind::Context | FrameKind::Fragment) {
                    String::new()
                } else {
                    format!(" stroke-dasharray=\"{}\"", t.frame_dash)
                };
                let _ = writeln!(
                    self.out,
                    "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" rx=\"{rx}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{dash} data-frame=\"{}\"{mark}/>",
                    num(n.x),
                    num(n.y),
                    num(n.w),
                    num(n.h),
                    stroke,
                    num(width),
                    frame_name(*kind)
                );
                if !label.is_empty() {
                    let attrs = format!(" fill=\"{}\"", t.frame_stroke);
                    self.text_line(n.x + t.padding, n.y + base + t.padding * 0.5, label, &attrs);
                }
            }
            NodeKind::Text { lines, style } => {
                let attrs = match style {
                    TextStyle::Comment => format!(" fill=\"{}\" font-style=\"italic\" data-style=\"comment\"", t.comment_color),
                    TextStyle::Unresolved => format!(" fill=\"{}\" font-style=\"italic\" data-style=\"unresolved\"", t.comment_color),
                    TextStyle::Statement => format!(" fill=\"{}\" data-style=\"statement\"", t.frame_stroke),
                    TextStyle::Footer => format!(" fill=\"{}\" data-style=\"footer\"", t.changed_stroke),
                    TextStyle::Content => format!(" fill=\"{}\"", t.text_color),
                };
                let attrs = match diff {
                    Some((k, _)) => format!("{attrs} data-diff=\"{k}\" text-decoration=\"underline\""),
                    None => attrs,
                };
                if lines.len() == 1 {
                    self.text_line(n.x, n.y + base, &lines[0], &attrs);
                } else {
                    let _ = writeln!(self.out, "<text x=\"{}\" y=\"{}\"{attrs}>", num(n.x), num(n.y + base));
                    for (i, l) in lines.iter().enumerate() {
                        let dy = if i == 0 { "0".to_string() } else { num(lh) };
                        let _ = writeln!(self.out, "<tspan x=\"{}\" dy=\"{dy}\">{}</tspan>", num(n.x), escape(l));
                    }
                    self.out.push_str("</text>\n");
                }
            }
            NodeKind::Divider { label } => {
                let y = n.y + lh * 0.5;
                let _ = writeln!(
                    self.out,
                    "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-dasharray=\"2 2\" data-divider=\"prompt-end\"/>",
                    num(n.x),
                    num(y),
                    num(n.x + n.w),
                    num(y),
                    t.changed_stroke
                );
                let attrs = format!(" fill=\"{}\"", t.changed_stroke);
                self.text_line(n.x, n.y + base, label, &attrs);
            }
            NodeKind::Bracket { number } => {
                let (x0, x1) = (n.x, n.x + n.w);
                let (y0, y1) = (n.y, n.y + n.h);
                let _ = writeln!(
                    self.out,
                    "<path d=\"M {} {} H {} V {} H {}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" data-mark=\"{number}\"/>",
                    num(x0),
                    num(y0),
                    num(x1),
                    num(y1),
                    num(x0),
                    t.text_color
                );
                let attrs = format!(" fill=\"{}\" font-weight=\"bold\"", t.text_color);
                self.text_line(x1 + 2.0, (y0 + y1) / 2.0 + t.font_size * 0.35, &number.to_string(), &attrs);
            }
        }
        for c in &n.children {
            self.node(c);
        }
    }
}

fn frame_name(k: FrameKind) -> &'static str {
    match k {
        FrameKind::Context => "context",
        FrameKind::Fragment => "fragment",
        FrameKind::Loop => "loop",
        FrameKind::Conditional => "conditional",
        FrameKind::Branch => "branch",
        FrameKind::Switch => "switch",
        FrameKind::Case => "case",
    }
}
