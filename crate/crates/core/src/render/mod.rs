//! Deterministic layout and SVG output, for both the structural view of a
//! document and the instance view of an expanded prompt.

pub mod layout;
pub mod svg;
pub mod theme;

pub use layout::{layout_context, layout_document, layout_expanded, FrameKind, LayoutTree, Node, NodeKind, TextStyle};
pub use svg::{render_svg, render_svg_annotated, Annotations};
pub use theme::{Theme, ThemeError};

use crate::expand::ExpandedPrompt;
use crate::syntax::ast::Document;

pub fn render_document(doc: &Document, theme: &Theme) -> String {
    render_svg(&layout_document(doc, theme), theme)
}

pub fn render_expanded(prompt: &ExpandedPrompt, title: &str, theme: &Theme) -> String {
    render_svg(&layout_expanded(prompt, title, theme), theme)
}
