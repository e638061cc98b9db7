use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::syntax::ast::NameValue;

/// Runtime value of an index expression or loop binder.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    /// A time point with sub-steps, outermost first.
    Coord(Vec<i64>),
    /// A string key, such as a collection element or an enum-like identifier.
    Key(String),
}

impl Value {
    /// Integers become `Int`, anything else a `Key`.
    pub fn from_text(s: &str) -> Value {
        match s.trim().parse::<i64>() {
            Ok(n) => Value::Int(n),
            Err(_) => Value::Key(s.to_string()),
        }
    }

    pub fn from_coords(mut c: Vec<i64>) -> Value {
        if c.len() == 1 {
            Value::Int(c.pop().unwrap())
        } else {
            Value::Coord(c)
        }
    }

    /// The integer view: an `Int`, or the last coordinate of a `Coord`.
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            Value::Coord(c) => c.last().copied(),
            Value::Key(k) => k.trim().parse().ok(),
        }
    }

    pub fn coords(&self) -> Option<Vec<i64>> {
        match self {
            Value::Int(n) => Some(vec![*n]),
            Value::Coord(c) => Some(c.clone()),
            Value::Key(_) => None,
        }
    }

    /// Form used inside environment keys: `3`, `2.1`, `"b1"`.
    pub fn key_text(&self) -> String {
        match self {
            Value::Key(k) => format!("\"{k}\""),
            other => other.to_string(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Coord(c) => {
                let parts: Vec<String> = c.iter().map(i64::to_string).collect();
                f.write_str(&parts.join("."))
            }
            Value::Key(k) => f.write_str(k),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(n) => s.serialize_i64(*n),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

/// A `Name` definition captured together with the bindings in force where it was defined.
#[derive(Debug, Clone)]
pub struct Closure {
    pub value: NameValue,
    pub env: Bindings,
}

#[derive(Debug, Clone, Default)]
pub struct Bindings {
    pub values: BTreeMap<String, Value>,
    /// Time parameter levels of the context (`["T", "I"]`).
    pub time_levels: Vec<String>,
    pub names: BTreeMap<String, Arc<Closure>>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, v: Value) -> Self {
        self.values.insert(name.to_string(), v);
        self
    }

    pub fn set(&mut self, name: &str, v: Value) {
        self.values.insert(name.to_string(), v);
    }

    /// Exact binding first, then a case-insensitive match among time levels,
    /// so `t` outside any loop reads as `T`.
    pub fn lookup(&self, name: &str) -> Option<&Value> {
        if let Some(v) = self.values.get(name) {
            return Some(v);
        }
        let level = self.time_levels.iter().find(|l| l.eq_ignore_ascii_case(name))?;
        self.values.get(level)
    }

    pub fn define(&mut self, name: &str, value: NameValue) {
        let env = self.clone();
        self.names.insert(name.to_string(), Arc::new(Closure { value, env }));
    }
}
