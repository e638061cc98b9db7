use std::fs;
use std::path::{Path, PathBuf};

use acdl_core::diag::{codes, has_errors};
use acdl_core::expand::{eval_condition, expand_series, Bindings, SlotKind, Value};
use acdl_core::syntax::ast::*;
use acdl_core::syntax::parse_condition;
use acdl_core::*;
use proptest::prelude::*;
use serde_json::Value as Json;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn load(rel: &str, context: &str) -> ResolvedContext {
    let src = fs::read_to_string(corpus().join(rel)).unwrap();
    let (doc, d) = parse(&src);
    assert!(!has_errors(&d), "{rel}: {d:#?}");
    let (ctx, d) = resolve(&doc, context);
    assert!(!has_errors(&d), "{rel}: {d:#?}");
    ctx.unwrap()
}

fn env_file(rel: &str) -> EnvironmentDocument {
    EnvironmentDocument::from_json(&fs::read_to_string(corpus().join(rel)).unwrap()).unwrap()
}

fn letters(p: &ExpandedPrompt) -> Vec<&'static str> {
    p.roles().iter().map(|r| r.letter()).collect()
}

#[test]
fn committed_expansion_oracles() {
    let mut seen = 0;
    for entry in fs::read_dir(corpus().join("expected")).unwrap() {
        let path = entry.unwrap().path();
        let want: Json = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        let ctx = load(want["spec"].as_str().unwrap(), want["context"].as_str().unwrap());
        let env = env_file(want["env"].as_str().unwrap());
        let (p, diags) = expand(&ctx, &env);
        assert!(!has_errors(&diags), "{}: {diags:#?}", path.display());
        let roles: Vec<&str> = want["roles"].as_array().unwrap().iter().map(|r| r.as_str().unwrap()).collect();
        assert_eq!(letters(&p), roles, "{}", path.display());
        seen += 1;
    }
    assert_eq!(seen, 5);
}

#[test]
fn tool_agent_sequences() {
    let ctx = load("listings/tool_agent.acdl", "ToolAgent");
    let (p, _) = expand(&ctx, &env_file("env/tool_agent_t1.json"));
    assert_eq!(letters(&p), ["S", "U", "S"]);
    let (p, d) = expand(&ctx, &env_file("env/tool_agent_t3.json"));
    assert!(d.is_empty(), "{d:#?}");
    assert_eq!(letters(&p), ["S", "U", "U", "A", "S"]);
    assert_eq!(p.messages[3].slots[0].text, "3 matching clauses");
}

/// Hand-expansion of the React1 loop: the system prompt and user question,
/// then one assistant/user pair per completed step.
fn react1_oracle(t: i64) -> Vec<&'static str> {
    let mut v = vec!["S", "U"];
    for _ in 1..t {
        v.push("A");
        v.push("U");
    }
    v
}

#[test]
fn react1_series() {
    let ctx = load("fixtures/react1.acdl", "React1");
    let envs: Vec<EnvironmentDocument> =
        (1..=3).map(|t| env_file(&format!("env/react1_t{t}.json"))).collect();
    let out = expand_series(&ctx, &envs).unwrap();
    let counts: Vec<usize> = out.iter().map(|(p, _)| p.messages.len()).collect();
    assert_eq!(counts, [2, 4, 6]);
    for (t, (p, _)) in (1..=3).zip(&out) {
        assert_eq!(letters(p), react1_oracle(t));
    }
    for t in 1..=40 {
        let (p, _) = expand(&ctx, &EnvironmentDocument::at(&[t]));
        assert_eq!(letters(&p), react1_oracle(t), "T={t}");
    }
    let single = expand_series(&ctx, &envs[..1]).unwrap();
    assert_eq!(single[0], expand(&ctx, &envs[0]));
}

#[test]
fn condition_examples() {
    let env = EnvironmentDocument::at(&[1]);
    let b = Bindings { time_levels: vec!["T".into()], ..Bindings::new() }.with("T", Value::Int(1));
    let c = |s: &str| parse_condition(s).0.unwrap();
    assert!(!eval_condition(&c("@T > 1"), &b, &env).unwrap());

    let env = EnvironmentDocument::at(&[3]).with_var("sys.tool[2]", "get_clarification");
    let b = Bindings::new().with("t", Value::Int(2));
    assert!(eval_condition(&c("sys.tool[@t] == get_clarification"), &b, &env).unwrap());

    let env = EnvironmentDocument::at(&[3, 0]);
    let b = Bindings { time_levels: vec!["T".into(), "I".into()], ..Bindings::new() }
        .with("T", Value::Int(3))
        .with("I", Value::Int(0))
        .with("t", Value::Int(3));
    for (src, want) in [("(@T == @t && @T.0)", true), ("@T == @t", true), ("@T.0", true)] {
        assert_eq!(eval_condition(&c(src), &b, &env).unwrap(), want, "{src}");
    }
    let env = EnvironmentDocument::at(&[3, 1]);
    assert!(!eval_condition(&c("(@T == @t && @T.0)"), &b, &env).unwrap());
}

fn range_doc(a: i64, b: i64, step: i64) -> ResolvedContext {
    let src = format!("P[@T]: {{\n  ForEach(i: range({a}, {b}, {step})) {{\n    U: env.x[i]\n  }}\n}}\n");
    let (doc, d) = parse(&src);
    assert!(!has_errors(&d), "{src}: {d:?}");
    resolve(&doc, "P").0.unwrap()
}

#[test]
fn range_is_exclusive() {
    let (p, _) = expand(&range_doc(1, 3, 1), &EnvironmentDocument::at(&[1]));
    let keys: Vec<String> = p.messages.iter().map(|m| m.slots[0].text.clone()).collect();
    assert_eq!(keys, ["env.x[1]", "env.x[2]"]);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]
    #[test]
    fn range_emission_count(a in -60i64..60, b in -60i64..60, step in 1i64..25) {
        let (p, d) = expand(&range_doc(a, b, step), &EnvironmentDocument::at(&[1]));
        prop_assert!(d.is_empty());
        let span = (b - a).max(0);
        let want = (span + step - 1) / step;
        prop_assert_eq!(p.messages.len() as i64, want);
        let mut expected = Vec::new();
        let mut i = a;
        while i < b {
            expected.push(format!("env.x[{i}]"));
            i += step;
        }
        let got: Vec<String> = p.messages.iter().map(|m| m.slots[0].text.clone()).collect();
        prop_assert_eq!(got, expected);
    }
}

fn all_contexts() -> Vec<(String, ResolvedContext)> {
    let mut out = Vec::new();
    for dir in ["listings", "fixtures", "diff"] {
        let mut files: Vec<PathBuf> =
            fs::read_dir(corpus().join(dir)).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        for f in files.into_iter().filter(|p| p.extension().is_some_and(|e| e == "acdl")) {
            let (doc, _) = parse(&fs::read_to_string(&f).unwrap());
            for c in doc.contexts() {
                let (ctx, _) = resolve(&doc, &c.name.name);
                out.push((format!("{}:{}", f.display(), c.name.name), ctx.unwrap()));
            }
        }
    }
    out
}

fn env_for(ctx: &ResolvedContext) -> EnvironmentDocument {
    let mut env = EnvironmentDocument::at(if ctx.time_levels().len() > 1 { &[3, 2] } else { &[3] });
    env.substeps.insert("[3]".into(), 2);
    env.params.insert("agent".into(), "alice".into());
    env.collections.insert("sys.agent_names".into(), vec!["alice".into(), "bob".into()]);
    env
}

#[test]
fn expansion_is_deterministic() {
    let run = || {
        all_contexts()
            .iter()
            .map(|(_, c)| {
                let (p, d) = expand(c, &env_for(c));
                let diags: Vec<Json> = d.iter().map(|d| d.to_json(None)).collect();
                serde_json::to_string(&(p.to_json(), diags)).unwrap()
            })
            .collect::<Vec<_>>()
    };
    let first = run();
    assert_eq!(first, run());
    assert_eq!(first, run());
}

#[test]
fn marks_do_not_change_content() {
    for (name, ctx) in all_contexts() {
        let mut plain = ctx.clone();
        plain.context.body = unwrap_marks(plain.context.body);
        let env = env_for(&ctx);
        let (a, _) = expand(&ctx, &env);
        let (b, _) = expand(&plain, &env);
        assert_eq!(a.messages, b.messages, "{name}");
        assert!(b.marks.is_empty());
    }
}

#[test]
fn completion_contexts_yield_one_message() {
    for (name, ctx) in all_contexts() {
        let mut has_n = false;
        walk_blocks(ctx.body(), &mut |b| {
            if matches!(&b.kind, BlockKind::Role(r) if r.role == Role::N) {
                has_n = true;
            }
        });
        if has_n {
            let (p, _) = expand(&ctx, &env_for(&ctx));
            assert_eq!(p.messages.len(), 1, "{name}");
        }
    }
}

fn drop_prompt_ends(blocks: &mut Vec<Block>) {
    blocks.retain(|b| !matches!(b.kind, BlockKind::PromptEndsHere { .. }));
    for b in blocks.iter_mut() {
        for list in child_lists_mut(b) {
            drop_prompt_ends(list);
        }
    }
}

#[test]
fn truncation_is_a_strict_prefix() {
    let ctx = load("fixtures/react2_short.acdl", "React2Short");
    let env = EnvironmentDocument::at(&[3, 0]);
    let (cut, _) = expand(&ctx, &env);
    let mut full_ctx = ctx.clone();
    drop_prompt_ends(&mut full_ctx.context.body);
    let (full, _) = expand(&full_ctx, &EnvironmentDocument::at(&[3, 2]));
    assert!(cut.messages.len() < full.messages.len());
    assert_eq!(cut.messages[..], full.messages[..cut.messages.len()]);
    assert_eq!(letters(&cut), ["S", "U", "A", "U", "A", "U"]);
}

#[test]
fn unknown_content_is_symbolic() {
    let ctx = load("listings/tool_agent.acdl", "ToolAgent");
    let (p, _) = expand(&ctx, &EnvironmentDocument::at(&[1]));
    assert_eq!(p.messages[0].slots[0].kind, SlotKind::Template);
    assert_eq!(p.messages[0].slots[0].text, "INSTRUCTIONS");
    assert_eq!(p.messages[1].slots[0].kind, SlotKind::Unresolved);
    assert_eq!(p.messages[1].slots[0].text, "env.user_input[1]");
}

#[test]
fn json_shape() {
    let ctx = load("listings/tool_agent.acdl", "ToolAgent");
    let (p, _) = expand(&ctx, &EnvironmentDocument::at(&[1]));
    let j = p.to_json();
    assert_eq!(j["messages"][0]["role"], "S");
    assert_eq!(j["messages"][0]["slots"][0]["kind"], "template");
    assert_eq!(j["messages"][0]["slots"][0]["text"], "INSTRUCTIONS");
    let span = &j["messages"][0]["slots"][0]["span"];
    let src = fs::read_to_string(corpus().join("listings/tool_agent.acdl")).unwrap();
    let (s, e) = (span[0].as_u64().unwrap() as usize, span[1].as_u64().unwrap() as usize);
    assert_eq!(&src[s..e], "INSTRUCTIONS");
    assert!(j["marks"].as_array().unwrap().is_empty());
}

#[test]
fn time_depth_is_checked() {
    let ctx = load("fixtures/react2.acdl", "React2");
    let (_, d) = expand(&ctx, &EnvironmentDocument::at(&[3]));
    assert_eq!(d[0].code, codes::TIME_DEPTH);
}
