use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::syntax::ast::Role;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleStyle {
    pub fill: String,
    pub stroke: String,
}

/// Colors and metrics. A theme file may give any subset of the fields;
/// the rest keep their defaults.
///
/// ```json
/// {"roles": {"S": {"fill": "#fde68a", "stroke": "#b45309"}}, "font_size": 12, "wrap_col": 48}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theme {
    pub roles: BTreeMap<String, RoleStyle>,
    pub font_size: f64,
    pub wrap_col: usize,
    pub padding: f64,
    pub gap: f64,
    pub frame_dash: String,
    pub frame_stroke: String,
    pub text_color: String,
    pub comment_color: String,
    pub background: String,
    pub changed_stroke: String,
    pub inserted_stroke: String,
}

fn style(fill: &str, stroke: &str) -> RoleStyle {
    RoleStyle { fill: fill.into(), stroke: stroke.into() }
}

impl Default for Theme {
    fn default() -> Self {
        let roles = BTreeMap::from([
            ("S".to_string(), style("#fde68a", "#b45309")),
            ("U".to_string(), style("#bfdbfe", "#1d4ed8")),
            ("A".to_string(), style("#bbf7d0", "#15803d")),
            ("T".to_string(), style("#ddd6fe", "#6d28d9")),
            ("N".to_string(), style("#e5e7eb", "#4b5563")),
        ]);
        Theme {
            roles,
            font_size: 12.0,
            wrap_col: 48,
            padding: 8.0,
            gap: 6.0,
            frame_dash: "4 3".into(),
            frame_stroke: "#6b7280".into(),
            text_color: "#111827".into(),
            comment_color: "#6b7280".into(),
            background: "#ffffff".into(),
            changed_stroke: "#dc2626".into(),
            inserted_stroke: "#059669".into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ThemeError {
    #[error("invalid theme: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid theme: {0}")]
    Invalid(String),
}

impl Theme {
    pub fn from_json(text: &str) -> Result<Theme, ThemeError> {
        let mut given: Theme = serde_json::from_str(text)?;
        let mut roles = Theme::default().roles;
        for (k, v) in std::mem::take(&mut given.roles) {
            if Role::from_letter(&k).is_none() {
                return Err(ThemeError::Invalid(format!("unknown role `{k}`; expected one of S, U, A, T, N")));
            }
            roles.insert(k, v);
        }
        given.roles = roles;
        if !(given.font_size > 0.0 && given.font_size <= 200.0) {
            return Err(ThemeError::Invalid(format!("font_size must be in (0, 200], got {}", given.font_size)));
        }
        if given.wrap_col < 8 {
            return Err(ThemeError::Invalid(format!("wrap_col must be at least 8, got {}", given.wrap_col)));
        }
        if given.padding < 0.0 || given.gap < 0.0 {
            return Err(ThemeError::Invalid("padding and gap must be non-negative".into()));
        }
        Ok(given)
    }

    pub fn role(&self, r: Role) -> &RoleStyle {
        &self.roles[r.letter()]
    }

    pub fn advance(&self) -> f64 {
        self.font_size * 0.6
    }

    pub fn line_height(&self) -> f64 {
        self.font_size * 1.5
    }
}
