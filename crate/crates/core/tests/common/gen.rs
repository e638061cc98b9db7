//! Seeded generator of valid ACDL documents and matching environments.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const TEMPLATES: &[&str] = &["INSTRUCTIONS", "AVAILABLE_TOOLS", "TASK_DESCRIPTION", "QUESTION", "EXAMPLES"];
const PATHS: &[&str] = &["env.user_input", "sys.tool_response", "resp.reasoning", "resp.tool_call", "sys.summary"];
const FUNCS: &[&str] = &["summarize", "k_relevant_docs", "format_tools"];
const ROLES: &[&str] = &["S", "U", "A", "T"];

pub struct Gen {
    rng: ChaCha8Rng,
    out: String,
    counter: usize,
    /// Loop binders in scope, innermost last.
    binders: Vec<String>,
    /// `$names` in scope, per block list.
    names: Vec<Vec<String>>,
    in_loop: bool,
    str_frags: Vec<String>,
    roles_frags: Vec<String>,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            out: String::new(),
            counter: 0,
            binders: Vec::new(),
            names: Vec::new(),
            in_loop: false,
            str_frags: Vec::new(),
            roles_frags: Vec::new(),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}{}", self.counter)
    }

    /// Time variables are letters only.
    fn fresh_letters(&mut self, prefix: &str) -> String {
        self.counter += 1;
        let mut n = self.counter;
        let mut s = String::from(prefix);
        while n > 0 {
            s.push((b'a' + (n % 26) as u8) as char);
            n /= 26;
        }
        s
    }

    fn line(&mut self, indent: usize, text: &str) {
        for _ in 0..indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn maybe_comment(&mut self, indent: usize) {
        if self.rng.gen_ratio(1, 8) {
            let n = self.rng.gen_range(0..100);
            self.line(indent, &format!("// note {n}"));
        }
    }

    /// A whole document with one context, optionally preceded by fragments.
    pub fn document(&mut self) -> String {
        self.out.clear();
        self.str_frags.clear();
        self.roles_frags.clear();
        if self.rng.gen_ratio(1, 3) {
            let name = self.fresh("Piece");
            self.line(0, &format!("StrFrag {name}[@t]: {{"));
            self.binders.push("t".into());
            self.names.push(Vec::new());
            let n = self.rng.gen_range(1..3);
            for _ in 0..n {
                let e = self.element();
                self.line(1, &e);
            }
            self.names.pop();
            self.binders.pop();
            self.line(0, "}");
            self.out.push('\n');
            self.str_frags.push(name);
        }
        if self.rng.gen_ratio(1, 3) {
            let name = self.fresh("Turn");
            self.line(0, &format!("RolesFrag {name}[@t]: {{"));
            self.binders.push("t".into());
            self.names.push(Vec::new());
            let saved = self.in_loop;
            self.in_loop = false;
            self.role(1, 2);
            self.in_loop = saved;
            self.names.pop();
            self.binders.pop();
            self.line(0, "}");
            self.out.push('\n');
            self.roles_frags.push(name);
        }
        let name = self.fresh("Ctx");
        let substeps = self.rng.gen_ratio(1, 4);
        self.line(0, &format!("{name}[{}]: {{", if substeps { "@T.I" } else { "@T" }));
        self.names.push(Vec::new());
        let n = self.rng.gen_range(0..5);
        for _ in 0..n {
            self.top(1, 3);
        }
        self.names.pop();
        self.line(0, "}");
        self.out.clone()
    }

    fn time_index(&mut self) -> String {
        match self.binders.last() {
            Some(b) if self.rng.gen_bool(0.7) => {
                if self.rng.gen_ratio(1, 5) {
                    format!("@{b} - 1")
                } else {
                    format!("@{b}")
                }
            }
            _ => ["@T", "@1", "@T - 1"].choose(&mut self.rng).unwrap().to_string(),
        }
    }

    fn var(&mut self) -> String {
        let path = *PATHS.choose(&mut self.rng).unwrap();
        match self.rng.gen_range(0..4) {
            0 => path.to_string(),
            1 => format!("{path}[{}].text", self.time_index()),
            _ => format!("{path}[{}]", self.time_index()),
        }
    }

    fn element(&mut self) -> String {
        let visible: Vec<String> = self.names.iter().flatten().cloned().collect();
        match self.rng.gen_range(0..10) {
            0..=2 => TEMPLATES.choose(&mut self.rng).unwrap().to_string(),
            3 => format!("{}({})", TEMPLATES.choose(&mut self.rng).unwrap(), self.var()),
            4..=6 => self.var(),
            7 => format!("{}({})", FUNCS.choose(&mut self.rng).unwrap(), self.var()),
            8 if !visible.is_empty() => format!("${}", visible.choose(&mut self.rng).unwrap()),
            8 => format!("\"literal {}\"", self.rng.gen_range(0..10)),
            _ => format!("{{{{inline {}}}}}", self.rng.gen_range(0..10)),
        }
    }

    fn condition(&mut self) -> String {
        let b = self.binders.last().cloned().unwrap_or_else(|| "T".into());
        match self.rng.gen_range(0..6) {
            0 => format!("@{b} > {}", self.rng.gen_range(0..4)),
            1 => format!("@{b} % 2 == 0"),
            2 => format!("sys.flag[@{b}]"),
            3 => format!("sys.tool[@{b}] == search"),
            4 => format!("@{b} > 1 & sys.flag[@{b}]"),
            _ => format!("@{b} == 1 | @{b} == 3"),
        }
    }

    fn loop_header(&mut self) -> (String, String) {
        let b = self.fresh_letters("t");
        let upper = match self.binders.last() {
            Some(outer) => format!("@{outer}"),
            None => "@T".to_string(),
        };
        let head = match self.rng.gen_range(0..4) {
            0 => format!("ForEach(@{b}: range(1, {upper} + 1))"),
            1 => format!("ForEach(@{b}: range(0, {upper}, 2))"),
            _ => format!("ForEach(@{b}: range(1, {upper}))"),
        };
        (b, head)
    }

    /// A top-level statement (outside any role message).
    fn top(&mut self, indent: usize, depth: usize) {
        self.maybe_comment(indent);
        let choice = if depth == 0 { 0 } else { self.rng.gen_range(0..10) };
        match choice {
            0..=3 => self.role(indent, depth),
            4 | 5 => {
                let (b, head) = self.loop_header();
                self.line(indent, &format!("{head} {{"));
                self.binders.push(b);
                let saved = self.in_loop;
                self.in_loop = true;
                self.names.push(Vec::new());
                for _ in 0..self.rng.gen_range(1..3) {
                    self.top(indent + 1, depth - 1);
                }
                self.maybe_loop_control(indent + 1);
                self.names.pop();
                self.in_loop = saved;
                self.binders.pop();
                self.line(indent, "}");
            }
            6 => self.if_chain(indent, depth, true),
            7 => {
                let n = self.rng.gen_range(1..4);
                self.line(indent, &format!("Mark {n} {{"));
                self.names.push(Vec::new());
                self.top(indent + 1, depth - 1);
                self.names.pop();
                self.line(indent, "}");
            }
            8 if !self.roles_frags.is_empty() => {
                let f = self.roles_frags.choose(&mut self.rng).unwrap().clone();
                let arg = self.time_index();
                self.line(indent, &format!("Frag {f}[{arg}]"));
            }
            8 => self.switch(indent, depth, true),
            _ => {
                let c = self.condition();
                self.role(indent, depth);
                self.line(indent, &format!("PromptEndsHere when {c}"));
            }
        }
    }

    fn maybe_loop_control(&mut self, indent: usize) {
        if self.in_loop && self.rng.gen_ratio(1, 6) {
            let c = self.condition();
            let kw = if self.rng.gen_bool(0.5) { "break" } else { "continue" };
            self.line(indent, &format!("If {c} {{"));
            self.line(indent + 1, kw);
            self.line(indent, "}");
        }
    }

    fn if_chain(&mut self, indent: usize, depth: usize, top: bool) {
        let c = self.condition();
        self.line(indent, &format!("If {c} {{"));
        self.body(indent + 1, depth - 1, top);
        let mut closing = "}".to_string();
        if self.rng.gen_bool(0.4) {
            let c = self.condition();
            self.line(indent, &format!("}} ElseIf {c} {{"));
            self.body(indent + 1, depth - 1, top);
        }
        if self.rng.gen_bool(0.5) {
            self.line(indent, "}");
            closing = "Else {".to_string();
            self.line(indent, &closing);
            self.body(indent + 1, depth - 1, top);
            closing = "}".to_string();
        }
        self.line(indent, &closing);
    }

    fn switch(&mut self, indent: usize, depth: usize, top: bool) {
        let v = self.var();
        self.line(indent, &format!("Switch {v} {{"));
        for label in ["\"search\"", "lookup"] {
            self.line(indent + 1, &format!("Case {label} {{"));
            self.body(indent + 2, depth - 1, top);
            self.line(indent + 1, "}");
        }
        if self.rng.gen_bool(0.5) {
            self.line(indent + 1, "Default {");
            self.body(indent + 2, depth - 1, top);
            self.line(indent + 1, "}");
        }
        self.line(indent, "}");
    }

    fn body(&mut self, indent: usize, depth: usize, top: bool) {
        self.names.push(Vec::new());
        if top {
            self.top(indent, depth);
        } else {
            self.content(indent, depth);
        }
        self.names.pop();
    }

    fn role(&mut self, indent: usize, depth: usize) {
        let role = *ROLES.choose(&mut self.rng).unwrap();
        if self.rng.gen_ratio(1, 3) {
            let e = match self.rng.gen_range(0..3) {
                0 => TEMPLATES.choose(&mut self.rng).unwrap().to_string(),
                1 => self.var(),
                _ => format!("{}({})", FUNCS.choose(&mut self.rng).unwrap(), self.var()),
            };
            self.line(indent, &format!("{role}: {e}"));
            return;
        }
        self.line(indent, &format!("{role}: {{"));
        self.names.push(Vec::new());
        let n = self.rng.gen_range(1..4);
        for _ in 0..n {
            self.content(indent + 1, depth.saturating_sub(1));
        }
        self.names.pop();
        self.line(indent, "}");
    }

    /// A statement inside a role message.
    fn content(&mut self, indent: usize, depth: usize) {
        self.maybe_comment(indent);
        let choice = if depth == 0 { 0 } else { self.rng.gen_range(0..12) };
        match choice {
            0..=4 => {
                let e = self.element();
                self.line(indent, &e);
            }
            5 => {
                let name = self.fresh("n");
                let value = if self.rng.gen_bool(0.5) {
                    self.var()
                } else {
                    let b = self.fresh_letters("k");
                    let path = *PATHS.choose(&mut self.rng).unwrap();
                    format!("[{path}[@{b}] for @{b} in range(1, @T)]")
                };
                self.line(indent, &format!("Name {name} := {value}"));
                self.names.last_mut().unwrap().push(name);
            }
            6 | 7 => {
                let (b, head) = self.loop_header();
                self.line(indent, &format!("{head} {{"));
                self.binders.push(b);
                let saved = self.in_loop;
                self.in_loop = true;
                self.names.push(Vec::new());
                self.content(indent + 1, depth - 1);
                self.maybe_loop_control(indent + 1);
                self.names.pop();
                self.in_loop = saved;
                self.binders.pop();
                self.line(indent, "}");
            }
            8 => self.if_chain(indent, depth, false),
            9 => self.switch(indent, depth, false),
            10 if !self.str_frags.is_empty() => {
                let f = self.str_frags.choose(&mut self.rng).unwrap().clone();
                let arg = self.time_index();
                self.line(indent, &format!("Frag {f}[{arg}]"));
            }
            _ => {
                let n = self.rng.gen_range(1..4);
                self.line(indent, &format!("Mark {n} {{"));
                self.names.push(Vec::new());
                let e = self.element();
                self.line(indent + 1, &e);
                self.names.pop();
                self.line(indent, "}");
            }
        }
    }

    /// An environment for any generated document: a time point, a value for
    /// most indexed variables, flags and tool names.
    pub fn environment(&mut self, substeps: bool) -> serde_json::Value {
        let t: i64 = self.rng.gen_range(1..6);
        let time = if substeps { vec![t, self.rng.gen_range(0..3)] } else { vec![t] };
        let mut vars = serde_json::Map::new();
        let mut conditions = serde_json::Map::new();
        for step in -1..=t + 1 {
            for path in PATHS {
                if self.rng.gen_ratio(3, 4) {
                    let v = format!("{path} at {step}: {}", self.rng.gen_range(0..1000));
                    vars.insert(format!("{path}[{step}]"), json!(v));
                    vars.insert(format!("{path}[{step}].text"), json!(format!("{v} text")));
                }
            }
            let tool = if self.rng.gen_bool(0.5) { "search" } else { "lookup" };
            vars.insert(format!("sys.tool[{step}]"), json!(tool));
            vars.insert(format!("sys.flag[{step}]"), json!(if self.rng.gen_bool(0.5) { 1 } else { 0 }));
        }
        for path in PATHS {
            vars.insert(path.to_string(), json!(format!("{path} shared")));
            vars.insert(format!("{path}.text"), json!(format!("{path} text")));
        }
        conditions.insert("unused".into(), json!(true));
        json!({"time": time, "vars": vars, "conditions": conditions, "substeps": {format!("[{t}]"): 2}})
    }
}
