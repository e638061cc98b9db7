use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

/// External valuation used to expand a context at one time point.
///
/// ```json
/// {"time": [3, 2],
///  "vars": {"env.user_question[2]": "..."},
///  "collections": {"env.bombs": ["b1", "b2"]},
///  "substeps": {"[2]": 4},
///  "conditions": {"sys.has_tool_call[@t] | t=1": true},
///  "functions": {"summarize(sys.history[3])": "..."}}
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentDocument {
    pub time: Vec<i64>,
    #[serde(default)]
    pub vars: BTreeMap<String, Json>,
    #[serde(default)]
    pub collections: BTreeMap<String, Vec<Json>>,
    #[serde(default)]
    pub substeps: BTreeMap<String, i64>,
    #[serde(default)]
    pub conditions: BTreeMap<String, bool>,
    #[serde(default)]
    pub functions: BTreeMap<String, Json>,
    /// Values for plain (non-time) context parameters, e.g. `agent`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Json>,
}

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("invalid environment document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid environment document: `time` must be a non-empty list of non-negative integers")]
    BadTime,
}

impl EnvironmentDocument {
    pub fn at(time: &[i64]) -> Self {
        EnvironmentDocument { time: time.to_vec(), ..Default::default() }
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let env: EnvironmentDocument = serde_json::from_str(text)?;
        env.check()?;
        Ok(env)
    }

    pub fn from_value(v: Json) -> Result<Self, EnvError> {
        let env: EnvironmentDocument = serde_json::from_value(v)?;
        env.check()?;
        Ok(env)
    }

    fn check(&self) -> Result<(), EnvError> {
        if self.time.is_empty() || self.time.iter().any(|&c| c < 0) {
            return Err(EnvError::BadTime);
        }
        Ok(())
    }

    pub fn var(&self, key: &str) -> Option<String> {
        self.vars.get(key).map(scalar_text)
    }

    pub fn function(&self, fingerprint: &str) -> Option<String> {
        self.functions.get(fingerprint).map(scalar_text)
    }

    pub fn param(&self, name: &str) -> Option<String> {
        self.params.get(name).map(scalar_text)
    }

    pub fn with_var(mut self, key: &str, value: impl Into<Json>) -> Self {
        self.vars.insert(key.to_string(), value.into());
        self
    }
}

/// Text of a scalar JSON value; structured values fall back to compact JSON.
pub fn scalar_text(v: &Json) -> String {
    match v {
        Json::String(s) => s.clone(),
        Json::Null => "null".to_string(),
        other => other.to_string(),
    }
}
