//! The `acdl` command line and its local HTTP API.

pub mod server;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use acdl_core::conform::{self, CheckOptions, Mode};
use acdl_core::diag::{has_errors, to_json_lines};
use acdl_core::diff::{diff, diff_svg, format_diff};
use acdl_core::render::{render_document, render_expanded, Theme};
use acdl_core::semantics::resolve_first;
use acdl_core::*;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIAG: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "acdl", version, about = "Parse, check, render, expand, diff and conformance-check ACDL specifications")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report syntax and scoping diagnostics; silent when clean.
    Check {
        file: PathBuf,
        /// Print the symbol table as JSON.
        #[arg(long)]
        symbols: bool,
        /// Also warn about inconsistent template and function arities.
        #[arg(long)]
        strict: bool,
        /// Diagnostics as JSON lines.
        #[arg(long)]
        json: bool,
    },
    /// Print the canonical formatting of a file.
    Fmt {
        file: PathBuf,
        /// Rewrite the file in place.
        #[arg(long)]
        write: bool,
    },
    /// Draw a document, or one expansion of it, as SVG.
    Render {
        file: PathBuf,
        #[command(flatten)]
        theme: ThemeArg,
        /// Render the prompt expanded against this environment instead.
        #[arg(long, value_name = "ENV")]
        expanded: Option<PathBuf>,
        #[arg(long)]
        context: Option<String>,
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Expand a context against an environment document.
    Expand {
        file: PathBuf,
        #[arg(long, value_name = "ENV")]
        env: PathBuf,
        /// Further environments, expanded in order after `--env`.
        #[arg(long, value_name = "ENV", num_args = 1..)]
        series: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        context: Option<String>,
    },
    /// Structural edit script from A to B.
    Diff {
        a: PathBuf,
        b: PathBuf,
        /// Context to compare; defaults to each file's first.
        #[arg(long)]
        context: Option<String>,
        /// Print B's drawing with the changes outlined.
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        json: bool,
        /// Also list comment changes.
        #[arg(long)]
        comments: bool,
        #[command(flatten)]
        theme: ThemeArg,
    },
    /// Check a recorded chat trace against the expanded spec.
    Conform {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Roles)]
        mode: ModeArg,
        /// Trace holds one message object per line.
        #[arg(long)]
        jsonl: bool,
        #[arg(long)]
        json: bool,
        /// Collapse whitespace runs before matching content.
        #[arg(long)]
        normalize_ws: bool,
        /// Let an N-format spec match a single message of any role.
        #[arg(long)]
        completion: bool,
        #[arg(long)]
        context: Option<String>,
    },
    /// Serve the HTTP API on localhost.
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
    },
}

#[derive(Debug, Args)]
pub struct ThemeArg {
    /// Theme JSON; falls back to $ACDL_THEME, then the built-in theme.
    #[arg(long = "theme", env = "ACDL_THEME", value_name = "FILE")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Roles,
    Content,
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

/// Failure that ends a command with a message on stderr.
struct Fail(i32, String);

type Res = Result<i32, Fail>;

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| Fail(EXIT_DIAG, format!("cannot read {}: {e}", path.display())))
}

fn load_theme(arg: &ThemeArg) -> Result<Theme, Fail> {
    match &arg.path {
        None => Ok(Theme::default()),
        Some(p) => Theme::from_json(&read(p)?).map_err(|e| Fail(EXIT_DIAG, format!("{}: {e}", p.display()))),
    }
}

fn load_env(path: &Path) -> Result<EnvironmentDocument, Fail> {
    EnvironmentDocument::from_json(&read(path)?).map_err(|e| Fail(EXIT_DIAG, format!("{}: {e}", path.display())))
}

/// Picks the named context, or the first one.
pub fn select(doc: &Document, context: Option<&str>) -> (Option<ResolvedContext>, Vec<Diagnostic>) {
    match context {
        Some(name) => resolve(doc, name),
        None => resolve_first(doc),
    }
}

/// Parses, validates and resolves; `None` when any step reported an error.
pub fn prepare(source: &str, context: Option<&str>) -> (Option<ResolvedContext>, Vec<Diagnostic>) {
    let (doc, mut diags) = check(source, ValidateOptions::default());
    if has_errors(&diags) {
        return (None, diags);
    }
    let (ctx, more) = select(&doc, context);
    diags.extend(more);
    if has_errors(&diags) {
        return (None, diags);
    }
    (ctx, diags)
}

fn report(io: &mut Io, diags: &[Diagnostic], file: &Path, json: bool) {
    let name = file.display().to_string();
    if json {
        let _ = write!(io.out, "{}", to_json_lines(diags, Some(&name)));
    } else {
        for d in diags {
            let _ = writeln!(io.out, "{}", d.render_human(&name));
        }
    }
}

fn load_context(io: &mut Io, file: &Path, context: Option<&str>) -> Result<ResolvedContext, Fail> {
    let src = read(file)?;
    let (ctx, diags) = prepare(&src, context);
    match ctx {
        Some(c) if !has_errors(&diags) => {
            report(io, &diags, file, false);
            Ok(c)
        }
        _ => {
            report(io, &diags, file, false);
            Err(Fail(EXIT_DIAG, String::new()))
        }
    }
}

fn emit(io: &mut Io, output: Option<&Path>, text: &str) -> Result<(), Fail> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Fail(EXIT_DIAG, format!("cannot write {}: {e}", p.display()))),
        None => {
            let _ = io.out.write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn time_label(t: &[i64]) -> String {
    t.iter().map(i64::to_string).collect::<Vec<_>>().join(".")
}

fn run_command(cmd: Command, io: &mut Io) -> Res {
    match cmd {
        Command::Check { file, symbols, strict, json } => {
            let (doc, diags) = check(&read(&file)?, ValidateOptions { strict });
            report(io, &diags, &file, json);
            if symbols {
                let table = serde_json::to_string_pretty(&build_symbols(&doc)).expect("symbol tables serialize");
                let _ = writeln!(io.out, "{table}");
            }
            Ok(if has_errors(&diags) { EXIT_DIAG } else { EXIT_OK })
        }
        Command::Fmt { file, write } => {
            let src = read(&file)?;
            let (doc, diags) = parse(&src);
            if has_errors(&diags) {
                report(io, &diags, &file, false);
                return Ok(EXIT_DIAG);
            }
            let text = format(&doc);
            if write {
                if text != src {
                    fs::write(&file, &text).map_err(|e| Fail(EXIT_DIAG, format!("cannot write {}: {e}", file.display())))?;
                }
            } else {
                let _ = io.out.write_all(text.as_bytes());
            }
            Ok(EXIT_OK)
        }
        Command::Render { file, theme, expanded, context, output } => {
            let theme = load_theme(&theme)?;
            let svg = match expanded {
                None => {
                    let (doc, diags) = parse(&read(&file)?);
                    if has_errors(&diags) {
                        report(io, &diags, &file, false);
                        return Ok(EXIT_DIAG);
                    }
                    render_document(&doc, &theme)
                }
                Some(env_path) => {
                    let env = load_env(&env_path)?;
                    let ctx = load_context(io, &file, context.as_deref())?;
                    let (p, diags) = expand(&ctx, &env);
                    report(io, &diags, &file, false);
                    if has_errors(&diags) {
                        return Ok(EXIT_DIAG);
                    }
                    render_expanded(&p, &format!("{} @ {}", ctx.name(), time_label(&env.time)), &theme)
                }
            };
            emit(io, output.as_deref(), &svg)?;
            Ok(EXIT_OK)
        }
        Command::Expand { file, env, series, json, context } => {
            let mut envs = vec![load_env(&env)?];
            for p in &series {
                envs.push(load_env(p)?);
            }
            let ctx = load_context(io, &file, context.as_deref())?;
            let runs = expand_series(&ctx, &envs).map_err(|d| Fail(EXIT_DIAG, d.to_string()))?;
            let mut failed = false;
            let mut records = Vec::new();
            for (env, (p, diags)) in envs.iter().zip(&runs) {
                failed |= has_errors(diags);
                if json {
                    let name = file.display().to_string();
                    records.push(serde_json::json!({
                        "time": env.time,
                        "expanded": p.to_json(),
                        "diagnostics": diags.iter().map(|d| d.to_json(Some(&name))).collect::<Vec<_>>(),
                    }));
                } else {
                    if runs.len() > 1 {
                        let _ = writeln!(io.out, "== {} @ {} ==", ctx.name(), time_label(&env.time));
                    }
                    let _ = write!(io.out, "{}", p.to_text());
                    report(io, diags, &file, false);
                }
            }
            if json {
                let v = if records.len() == 1 { records.remove(0) } else { serde_json::Value::Array(records) };
                let _ = writeln!(io.out, "{}", serde_json::to_string_pretty(&v).expect("json values serialize"));
            }
            Ok(if failed { EXIT_DIAG } else { EXIT_OK })
        }
        Command::Diff { a, b, context, svg, json, comments, theme } => {
            let theme = load_theme(&theme)?;
            let ca = load_context(io, &a, context.as_deref())?;
            let cb = load_context(io, &b, context.as_deref())?;
            let r = diff(&ca.context, &cb.context);
            if svg {
                let _ = io.out.write_all(diff_svg(&r, &cb.context, &theme).as_bytes());
            } else if json {
                let mut v = serde_json::to_value(&r).expect("reports serialize");
                if !comments {
                    v.as_object_mut().expect("report is an object").remove("comments");
                }
                let _ = writeln!(io.out, "{}", serde_json::to_string_pretty(&v).expect("json values serialize"));
            } else {
                let _ = write!(io.out, "{}", format_diff(&r, comments));
            }
            Ok(EXIT_OK)
        }
        Command::Conform { spec, env, trace, mode, jsonl, json, normalize_ws, completion, context } => {
            let env = load_env(&env)?;
            let text = read(&trace)?;
            let loaded = if jsonl { conform::load_trace_jsonl(&text) } else { conform::load_trace(&text) };
            let tr = loaded.map_err(|d| Fail(EXIT_DIAG, format!("{}: {}[{}]: {}", trace.display(), d.severity, d.code, d.message)))?;
            let ctx = load_context(io, &spec, context.as_deref())?;
            let (p, diags) = expand(&ctx, &env);
            report(io, &diags, &spec, false);
            if has_errors(&diags) {
                return Ok(EXIT_DIAG);
            }
            let mode = match mode {
                ModeArg::Roles => Mode::Roles,
                ModeArg::Content => Mode::Content,
            };
            let r = conform::check_trace(&p, &tr, CheckOptions { mode, normalize_ws, completion });
            if json {
                let _ = writeln!(io.out, "{}", serde_json::to_string_pretty(&r).expect("reports serialize"));
            } else {
                let _ = write!(io.out, "{}", r.to_text());
            }
            Ok(if r.passed() { EXIT_OK } else { EXIT_DIAG })
        }
        Command::Serve { port } => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| Fail(EXIT_DIAG, e.to_string()))?;
            let _ = writeln!(io.err, "listening on http://127.0.0.1:{port}");
            rt.block_on(server::serve(port)).map_err(|e| Fail(EXIT_DIAG, format!("serve: {e}")))?;
            Ok(EXIT_OK)
        }
    }
}

/// Runs the command line with the given arguments (program name first)
/// and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut io = Io { out, err };
    match run_command(cli.command, &mut io) {
        Ok(code) => code,
        Err(Fail(code, msg)) => {
            if !msg.is_empty() {
                let _ = writeln!(io.err, "error: {msg}");
            }
            code
        }
    }
}
