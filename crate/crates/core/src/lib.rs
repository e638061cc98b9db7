//! Toolchain for the Agentic Context Description Language: parsing,
//! validation, fragment resolution, expansion against an environment,
//! SVG rendering, structural diffing, and trace conformance checking.

pub mod conform;
pub mod diag;
pub mod diff;
pub mod expand;
pub mod render;
pub mod semantics;
pub mod syntax;

pub use diag::{Diagnostic, Severity, Span};
pub use expand::{expand, expand_series, EnvironmentDocument, ExpandedPrompt};
pub use semantics::{build_symbols, resolve, validate, ResolvedContext, SymbolTable, ValidateOptions};
pub use syntax::ast::*;
pub use syntax::{format, parse};

/// Parses `source` and, when it parsed cleanly, validates it.
pub fn check(source: &str, opts: ValidateOptions) -> (Document, Vec<Diagnostic>) {
    let (doc, mut diags) = parse(source);
    if !diag::has_errors(&diags) {
        diags.extend(semantics::validate_with(&doc, opts));
    }
    (doc, diags)
}
