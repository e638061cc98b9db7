use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::syntax::ast::*;
use crate::syntax::format::{format_expr, time_ref};

/// Every symbol a document mentions, grouped by category. All maps are
/// ordered so the table serializes identically on every run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SymbolTable {
    pub templates: BTreeMap<String, BTreeSet<usize>>,
    pub functions: BTreeMap<String, BTreeSet<usize>>,
    /// Dotted path (`sys.tool.tool_response`) to the indexed forms seen.
    pub context_vars: BTreeMap<String, BTreeSet<String>>,
    /// Scope (`Context/2/0`: definition, then block positions) to the names
    /// defined directly in it and their bound expressions.
    pub names: BTreeMap<String, BTreeMap<String, String>>,
    pub fragments: BTreeMap<String, FragmentSymbol>,
    pub contexts: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FragmentSymbol {
    pub kind: FragKind,
    pub params: Vec<String>,
}

impl SymbolTable {
    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
            && self.functions.is_empty()
            && self.context_vars.is_empty()
            && self.names.is_empty()
            && self.fragments.is_empty()
            && self.contexts.is_empty()
    }
}

fn param_text(p: &Param) -> String {
    match p {
        Param::Time(t) => time_ref(t),
        Param::Plain(i) => i.name.clone(),
    }
}

pub fn build_symbols(doc: &Document) -> SymbolTable {
    let mut t = SymbolTable::default();
    for item in &doc.items {
        match item {
            Item::Context(c) => {
                t.contexts.insert(c.name.name.clone(), c.params.iter().map(param_text).collect());
                collect(&mut t, &c.name.name, &c.body);
            }
            Item::Fragment(f) => {
                let sym = FragmentSymbol { kind: f.kind, params: f.params.iter().map(param_text).collect() };
                t.fragments.insert(f.name.name.clone(), sym);
                collect(&mut t, &f.name.name, &f.body);
            }
            Item::Comment(_) => {}
        }
    }
    t
}

fn collect(t: &mut SymbolTable, scope: &str, blocks: &[Block]) {
    for (i, b) in blocks.iter().enumerate() {
        if let BlockKind::Name(n) = &b.kind {
            let value = match &n.value {
                NameValue::Expr(e) => format_expr(e),
                NameValue::Comprehension { item, binder, iterable } => format!(
                    "[{} for {} in {}]",
                    format_expr(item),
                    binder.name,
                    format_expr(iterable)
                ),
            };
            t.names.entry(scope.to_string()).or_default().insert(n.name.name.clone(), value);
        }
        for e in block_exprs(b) {
            walk_expr(e, &mut |e| match &e.kind {
                ExprKind::Template { name, args } => {
                    let arity = args.as_ref().map_or(0, Vec::len);
                    t.templates.entry(name.clone()).or_default().insert(arity);
                }
                ExprKind::Call { name, args, .. } => {
                    t.functions.entry(name.clone()).or_default().insert(args.len());
                }
                ExprKind::Var(v) => {
                    t.context_vars.entry(v.dotted_path()).or_default().insert(format_expr(e));
                }
                _ => {}
            });
        }
        for (j, list) in child_lists(b).into_iter().enumerate() {
            let inner = if child_lists(b).len() == 1 { format!("{scope}/{i}") } else { format!("{scope}/{i}.{j}") };
            collect(t, &inner, list);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    #[test]
    fn empty_document() {
        assert!(build_symbols(&Document::default()).is_empty());
    }

    #[test]
    fn template_arity() {
        let (doc, _) = parse("P: {\n  S: QUERY(sys.agent_name)\n}\n");
        let t = build_symbols(&doc);
        assert_eq!(t.templates["QUERY"], BTreeSet::from([1]));
        assert!(t.context_vars.contains_key("sys.agent_name"));
    }
}
