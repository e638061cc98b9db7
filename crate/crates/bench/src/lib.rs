//! Inputs for the pipeline benchmarks in `benches/`.

use std::fmt::Write;

use acdl_core::EnvironmentDocument;

/// A ReAct-style context whose loop body holds `width` assistant slots.
pub fn react_spec(width: usize) -> String {
    let mut s = String::from("Bench[@T]: {\n  S: {\n    TASK_DESCRIPTION\n    AVAILABLE_TOOLS\n  }\n  U: env.question\n");
    s.push_str("  ForEach(@t: range(1, @T)) {\n    A: {\n");
    for i in 0..width {
        let _ = writeln!(s, "      resp.part{i}[@t]");
    }
    s.push_str("    }\n    If sys.tool[@t] == \"search\" {\n      T: sys.tool_response[@t]\n    } Else {\n      U: env.feedback[@t]\n    }\n  }\n}\n");
    s
}

/// Environment at time `t` binding every variable [`react_spec`] reads.
pub fn react_env(t: i64, width: usize) -> EnvironmentDocument {
    let mut env = EnvironmentDocument::at(&[t]);
    env.vars.insert("env.question".into(), "what is the capital of France?".into());
    for step in 1..t {
        let tool = if step % 2 == 0 { "search" } else { "ask" };
        env.vars.insert(format!("sys.tool[{step}]"), tool.into());
        env.vars.insert(format!("sys.tool_response[{step}]"), format!("result {step}").into());
        env.vars.insert(format!("env.feedback[{step}]"), format!("feedback {step}").into());
        for i in 0..width {
            env.vars.insert(format!("resp.part{i}[{step}]"), format!("part {i} of step {step}").into());
        }
    }
    env
}
