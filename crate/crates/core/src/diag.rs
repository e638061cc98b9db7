use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

/// Byte range into the source, plus the 1-based line and column of `start`.
///
/// Spans never participate in structural equality: two nodes that differ
/// only in where they came from compare equal. Compare the fields directly
/// when the location itself matters.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(start: usize, end: usize, line: u32, col: u32) -> Self {
        Span { start, end, line, col }
    }

    /// Smallest span covering both `self` and `other`.
    pub fn to(self, other: Span) -> Span {
        let (first, _) = if other.start < self.start { (other, self) } else { (self, other) };
        Span {
            start: first.start,
            end: self.end.max(other.end),
            line: first.line,
            col: first.col,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn same_location(&self, other: &Span) -> bool {
        self.start == other.start && self.end == other.end
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Eq for Span {}

impl Hash for Span {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: &'static str,
    pub severity: Severity,
    pub message: String,
    pub span: Span,
}

impl Diagnostic {
    pub fn error(code: &'static str, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { code, severity: Severity::Error, message: message.into(), span }
    }

    pub fn warning(code: &'static str, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { code, severity: Severity::Warning, message: message.into(), span }
    }

    pub fn info(code: &'static str, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { code, severity: Severity::Info, message: message.into(), span }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// The JSON-lines record for this diagnostic.
    pub fn to_json(&self, file: Option<&str>) -> serde_json::Value {
        serde_json::json!({
            "code": self.code,
            "severity": self.severity,
            "message": self.message,
            "span": {
                "start": self.span.start,
                "end": self.span.end,
                "line": self.span.line,
                "col": self.span.col,
            },
            "file": file,
        })
    }

    pub fn render_human(&self, file: &str) -> String {
        format!(
            "{}:{}:{}: {}[{}]: {}",
            file, self.span.line, self.span.col, self.severity, self.code, self.message
        )
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {}[{}]: {}",
            self.span.line, self.span.col, self.severity, self.code, self.message
        )
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(Diagnostic::is_error)
}

/// Serializes diagnostics as JSON lines, one object per line.
pub fn to_json_lines(diags: &[Diagnostic], file: Option<&str>) -> String {
    let mut out = String::new();
    for d in diags {
        out.push_str(&d.to_json(file).to_string());
        out.push('\n');
    }
    out
}

/// Stable diagnostic codes.
pub mod codes {
    pub const LEX: &str = "E-LEX";
    pub const SYNTAX: &str = "E-SYNTAX";
    pub const NESTED_ROLE: &str = "E-NESTED-ROLE";
    pub const SINGLELINE_CTRL: &str = "E-SINGLELINE-CTRL";
    pub const SINGLELINE_ELEM: &str = "E-SINGLELINE-ELEM";
    pub const UNBALANCED: &str = "E-UNBALANCED";
    pub const ORDER_OP: &str = "I-ORDER-OP";

    pub const N_MULTI: &str = "E-N-MULTI";
    pub const N_MIXED: &str = "E-N-MIXED";
    pub const N_TOPLEVEL: &str = "E-N-TOPLEVEL";
    pub const FRAG_POSITION: &str = "E-FRAG-POSITION";
    pub const FRAG_UNKNOWN: &str = "E-FRAG-UNKNOWN";
    pub const NAME_UNBOUND: &str = "E-NAME-UNBOUND";
    pub const FRAG_ARITY: &str = "E-FRAG-ARITY";
    pub const LOOPCTL: &str = "E-LOOPCTL";
    pub const DUP_DEF: &str = "E-DUP-DEF";
    pub const TOPLEVEL_CONTENT: &str = "E-TOPLEVEL-CONTENT";
    pub const NAMING: &str = "W-NAMING";
    pub const NAME_SHADOW: &str = "W-NAME-SHADOW";
    pub const DUP_MARK: &str = "W-DUP-MARK";
    pub const ARITY_VARIES: &str = "W-ARITY-VARIES";
    pub const SUBSTEP_ATOM: &str = "I-SUBSTEP-ATOM";
    pub const NO_CONTEXT: &str = "E-NO-CONTEXT";
    pub const FRAG_CYCLE: &str = "E-FRAG-CYCLE";
    pub const FRAG_SUBST: &str = "E-FRAG-SUBST";

    pub const UNBOUND_IDX: &str = "X-UNBOUND-IDX";
    pub const DIV_ZERO: &str = "X-DIV-ZERO";
    pub const UNDECIDED_COND: &str = "X-UNDECIDED-COND";
    pub const BAD_STEP: &str = "X-BAD-STEP";
    pub const EMPTY_SERIES: &str = "X-EMPTY-SERIES";
    pub const SERIES_ORDER: &str = "X-SERIES-ORDER";
    pub const TIME_DEPTH: &str = "X-TIME-DEPTH";
    pub const NO_COLLECTION: &str = "X-NO-COLLECTION";
    pub const NOT_ITERABLE: &str = "X-NOT-ITERABLE";
    pub const OVERFLOW: &str = "X-OVERFLOW";

    pub const DIFF_APPROX: &str = "W-DIFF-APPROX";
    pub const BAD_TRACE: &str = "C-BAD-TRACE";
}
