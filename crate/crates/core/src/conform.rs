//! Checks a recorded chat-API message trace against an expanded prompt.

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::diag::{codes, Diagnostic, Span};
use crate::expand::{ExpandedPrompt, Message};
use crate::syntax::ast::Role;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub messages: Vec<TraceMessage>,
}

impl Trace {
    pub fn roles(&self) -> Vec<Role> {
        self.messages.iter().map(|m| m.role).collect()
    }

    pub fn to_json(&self) -> Json {
        Json::Array(
            self.messages
                .iter()
                .map(|m| serde_json::json!({"role": role_name(m.role), "content": m.content}))
                .collect(),
        )
    }
}

pub fn role_name(r: Role) -> &'static str {
    match r {
        Role::S => "system",
        Role::U => "user",
        Role::A => "assistant",
        Role::T => "tool",
        Role::N => "completion",
    }
}

fn bad(msg: String) -> Diagnostic {
    Diagnostic::error(codes::BAD_TRACE, Span::default(), msg)
}

fn message(i: usize, v: &Json) -> Result<TraceMessage, Diagnostic> {
    let obj = v.as_object().ok_or_else(|| bad(format!("message {i} is not an object")))?;
    let role = match obj.get("role").and_then(Json::as_str) {
        Some("system") => Role::S,
        Some("user") => Role::U,
        Some("assistant") => Role::A,
        Some("tool") => Role::T,
        Some(other) => return Err(bad(format!("message {i} has unknown role \"{other}\""))),
        None => return Err(bad(format!("message {i} has no string `role`"))),
    };
    // assistant turns that only carry tool calls send `content: null`
    let content = match obj.get("content") {
        Some(Json::String(s)) => s.clone(),
        Some(Json::Null) => String::new(),
        _ => return Err(bad(format!("message {i} has no string `content`"))),
    };
    Ok(TraceMessage { role, content })
}

/// Parses a JSON array of `{role, content}` objects. Other fields are ignored.
pub fn load_trace(text: &str) -> Result<Trace, Diagnostic> {
    let v: Json = serde_json::from_str(text).map_err(|e| bad(format!("trace is not valid JSON: {e}")))?;
    let items = v.as_array().ok_or_else(|| bad("trace must be a JSON array of messages".into()))?;
    let messages = items.iter().enumerate().map(|(i, m)| message(i, m)).collect::<Result<_, _>>()?;
    Ok(Trace { messages })
}

/// One message object per non-blank line.
pub fn load_trace_jsonl(text: &str) -> Result<Trace, Diagnostic> {
    let mut messages = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Json = serde_json::from_str(line).map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
        messages.push(message(messages.len(), &v)?);
    }
    Ok(Trace { messages })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Roles,
    Content,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CheckOptions {
    pub mode: Mode,
    pub normalize_ws: bool,
    /// Lets a prompt made only of `N` messages match one trace message of any role.
    pub completion: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    /// 1-based message position.
    pub position: usize,
    pub expected: String,
    pub observed: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConformanceReport {
    pub verdict: Verdict,
    pub mode: Mode,
    pub mismatches: Vec<Mismatch>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_text(&self) -> String {
        let mode = match self.mode {
            Mode::Roles => "roles",
            Mode::Content => "content",
        };
        let mut out = match self.verdict {
            Verdict::Pass => format!("pass ({mode})\n"),
            Verdict::Fail => format!("fail ({mode}): {} mismatch(es)\n", self.mismatches.len()),
        };
        for m in &self.mismatches {
            out.push_str(&format!("  #{}: expected {}, observed {}\n", m.position, m.expected, m.observed));
        }
        out
    }
}

const EXCERPT: usize = 40;

fn excerpt(m: &TraceMessage) -> String {
    let mut s: String = m.content.chars().take(EXCERPT).collect();
    if m.content.chars().count() > EXCERPT {
        s.push('…');
    }
    format!("{}: {:?}", role_name(m.role), s)
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Bound slot values of a message in order, blank ones dropped.
fn values(m: &Message) -> impl Iterator<Item = &crate::expand::Slot> {
    m.slots.iter().filter(|s| s.has_value() && !s.text.is_empty())
}

/// First slot whose value is not found, searching left to right; each
/// search starts one character after the previous match.
fn missing_value<'a>(slots: &[&'a crate::expand::Slot], content: &str, ws: bool) -> Option<&'a crate::expand::Slot> {
    let content = if ws { collapse(content) } else { content.to_string() };
    let mut from = 0;
    for s in slots {
        let needle = if ws { collapse(&s.text) } else { s.text.clone() };
        if needle.is_empty() {
            continue;
        }
        match content[from..].find(&needle) {
            Some(i) => {
                let at = from + i;
                from = at + content[at..].chars().next().map_or(1, char::len_utf8);
            }
            None => return Some(s),
        }
    }
    None
}

fn slot_label(s: &crate::expand::Slot) -> String {
    format!("{} = {:?}", s.key.as_deref().unwrap_or("value"), s.text)
}

pub fn check_trace(expanded: &ExpandedPrompt, trace: &Trace, opts: CheckOptions) -> ConformanceReport {
    let mut mismatches = Vec::new();
    let only_n = !expanded.messages.is_empty() && expanded.messages.iter().all(|m| m.role == Role::N);
    if opts.completion && only_n {
        match trace.messages.as_slice() {
            [one] => {
                if opts.mode == Mode::Content {
                    let slots: Vec<_> = expanded.messages.iter().flat_map(values).collect();
                    if let Some(s) = missing_value(&slots, &one.content, opts.normalize_ws) {
                        mismatches.push(Mismatch { position: 1, expected: format!("N containing {}", slot_label(s)), observed: excerpt(one) });
                    }
                }
            }
            ms => mismatches.push(Mismatch {
                position: 1,
                expected: "a single completion message".into(),
                observed: format!("{} messages", ms.len()),
            }),
        }
        return report(mismatches, opts.mode);
    }
    let n = expanded.messages.len().max(trace.messages.len());
    for i in 0..n {
        let (e, o) = (expanded.messages.get(i), trace.messages.get(i));
        let (e, o) = match (e, o) {
            (Some(e), Some(o)) => (e, o),
            (Some(e), None) => {
                mismatches.push(Mismatch { position: i + 1, expected: format!("{} message", e.role), observed: "nothing".into() });
                continue;
            }
            (None, Some(o)) => {
                mismatches.push(Mismatch { position: i + 1, expected: "end of prompt".into(), observed: excerpt(o) });
                continue;
            }
            (None, None) => unreachable!(),
        };
        if e.role != o.role {
            mismatches.push(Mismatch { position: i + 1, expected: format!("{} message", e.role), observed: excerpt(o) });
            continue;
        }
        if opts.mode == Mode::Content {
            let slots: Vec<_> = values(e).collect();
            if let Some(s) = missing_value(&slots, &o.content, opts.normalize_ws) {
                mismatches.push(Mismatch {
                    position: i + 1,
                    expected: format!("{} containing {}", e.role, slot_label(s)),
                    observed: excerpt(o),
                });
            }
        }
    }
    report(mismatches, opts.mode)
}

fn report(mismatches: Vec<Mismatch>, mode: Mode) -> ConformanceReport {
    let verdict = if mismatches.is_empty() { Verdict::Pass } else { Verdict::Fail };
    ConformanceReport { verdict, mode, mismatches }
}

/// The trace a faithful system would send: each message's bound values concatenated.
pub fn synthesize(expanded: &ExpandedPrompt) -> Trace {
    let messages = expanded
        .messages
        .iter()
        .map(|m| TraceMessage { role: m.role, content: values(m).map(|s| s.text.as_str()).collect::<Vec<_>>().join("") })
        .collect();
    Trace { messages }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_smallest_trace() {
        let t = load_trace(r#"[{"role":"system","content":"a"},{"role":"user","content":"b"}]"#).unwrap();
        assert_eq!(t.roles(), vec![Role::S, Role::U]);
        assert!(load_trace("[]").unwrap().messages.is_empty());
    }

    #[test]
    fn unknown_role_names_index() {
        let e = load_trace(r#"[{"role":"user","content":""},{"role":"function","content":"x"}]"#).unwrap_err();
        assert_eq!(e.code, codes::BAD_TRACE);
        assert!(e.message.contains("message 1"), "{}", e.message);
        assert_eq!(load_trace("{").unwrap_err().code, codes::BAD_TRACE);
    }

    #[test]
    fn jsonl() {
        let t = load_trace_jsonl("{\"role\":\"user\",\"content\":\"hi\"}\n\n{\"role\":\"tool\",\"content\":\"x\",\"tool_call_id\":\"9\"}\n").unwrap();
        assert_eq!(t.roles(), vec![Role::U, Role::T]);
    }

    #[test]
    fn greedy_overlap_needs_distinct_offsets() {
        let slot = |t: &str| crate::expand::Slot {
            kind: crate::expand::SlotKind::Var,
            text: t.into(),
            key: None,
            span: Span::default(),
            bindings: Default::default(),
        };
        let (a, b) = (slot("aa"), slot("aa"));
        assert!(missing_value(&[&a, &b], "aaa", false).is_none());
        assert!(missing_value(&[&a, &b], "aa", false).is_some());
        let c = slot("x  y");
        assert!(missing_value(&[&c], "x y", false).is_some());
        assert!(missing_value(&[&c], "x \n y", true).is_none());
    }
}
