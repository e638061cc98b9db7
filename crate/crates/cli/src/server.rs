//! JSON API behind `acdl serve`, bound to 127.0.0.1 only.

use std::net::{Ipv4Addr, SocketAddr};

use acdl_core::diag::has_errors;
use acdl_core::diff::{diff, diff_svg, format_diff};
use acdl_core::render::{render_document, render_expanded, Theme};
use acdl_core::*;
use axum::body::Bytes;
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::{prepare, select};

pub fn router() -> Router {
    Router::new()
        .route("/", get(index))
        .route("/api/parse", post(api_parse))
        .route("/api/render", post(api_render))
        .route("/api/expand", post(api_expand))
        .route("/api/diff", post(api_diff))
}

pub async fn serve(port: u16) -> std::io::Result<()> {
    let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router()).await
}

async fn index() -> Html<&'static str> {
    Html(concat!(
        "<!doctype html><html><head><meta charset=\"utf-8\"><title>acdl</title></head><body>",
        "<h1>acdl ",
        env!("CARGO_PKG_VERSION"),
        "</h1><p>The API is up. POST JSON to <code>/api/parse</code>, <code>/api/render</code>, ",
        "<code>/api/expand</code> or <code>/api/diff</code>.</p></body></html>"
    ))
}

fn bad_request(msg: impl Into<String>) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "error": msg.into() }))).into_response()
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, Box<Response>> {
    serde_json::from_slice(bytes).map_err(|e| Box::new(bad_request(format!("malformed request body: {e}"))))
}

fn diags_json(diags: &[Diagnostic]) -> Vec<Value> {
    diags.iter().map(|d| d.to_json(None)).collect()
}

fn theme(v: Option<Value>) -> Result<Theme, Box<Response>> {
    match v {
        None | Some(Value::Null) => Ok(Theme::default()),
        Some(t) => Theme::from_json(&t.to_string()).map_err(|e| Box::new(bad_request(format!("theme: {e}")))),
    }
}

fn env(v: Value) -> Result<EnvironmentDocument, Box<Response>> {
    EnvironmentDocument::from_value(v).map_err(|e| Box::new(bad_request(format!("env: {e}"))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParseReq {
    source: String,
    #[serde(default)]
    strict: bool,
}

async fn api_parse(bytes: Bytes) -> Response {
    let req: ParseReq = match body(&bytes) {
        Ok(r) => r,
        Err(e) => return *e,
    };
    let (doc, diags) = check(&req.source, ValidateOptions { strict: req.strict });
    let mut out = json!({ "diagnostics": diags_json(&diags) });
    if !has_errors(&diags) {
        out["ast"] = serde_json::to_value(&doc).expect("documents serialize");
    }
    Json(out).into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RenderReq {
    source: String,
    theme: Option<Value>,
    env: Option<Value>,
    context: Option<String>,
}

async fn api_render(bytes: Bytes) -> Response {
    let req: RenderReq = match body(&bytes) {
        Ok(r) => r,
        Err(e) => return *e,
    };
    let theme = match theme(req.theme) {
        Ok(t) => t,
        Err(e) => return *e,
    };
    match req.env {
        None => {
            let (doc, diags) = check(&req.source, ValidateOptions::default());
            let svg = render_document(&doc, &theme);
            Json(json!({ "svg": svg, "diagnostics": diags_json(&diags) })).into_response()
        }
        Some(v) => {
            let env = match env(v) {
                Ok(e) => e,
                Err(e) => return *e,
            };
            let (ctx, mut diags) = prepare(&req.source, req.context.as_deref());
            let svg = ctx.map(|ctx| {
                let (p, more) = expand(&ctx, &env);
                diags.extend(more);
                let t: Vec<String> = env.time.iter().map(i64::to_string).collect();
                render_expanded(&p, &format!("{} @ {}", ctx.name(), t.join(".")), &theme)
            });
            Json(json!({ "svg": svg, "diagnostics": diags_json(&diags) })).into_response()
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpandReq {
    source: String,
    context: Option<String>,
    env: Value,
}

async fn api_expand(bytes: Bytes) -> Response {
    let req: ExpandReq = match body(&bytes) {
        Ok(r) => r,
        Err(e) => return *e,
    };
    let env = match env(req.env) {
        Ok(e) => e,
        Err(e) => return *e,
    };
    let (ctx, mut diags) = prepare(&req.source, req.context.as_deref());
    let expanded = ctx.map(|ctx| {
        let (p, more) = expand(&ctx, &env);
        diags.extend(more);
        p.to_json()
    });
    Json(json!({ "expanded": expanded, "diagnostics": diags_json(&diags) })).into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiffReq {
    a: String,
    b: String,
    context: Option<String>,
    #[serde(default)]
    svg: bool,
    theme: Option<Value>,
}

async fn api_diff(bytes: Bytes) -> Response {
    let req: DiffReq = match body(&bytes) {
        Ok(r) => r,
        Err(e) => return *e,
    };
    let theme = match theme(req.theme) {
        Ok(t) => t,
        Err(e) => return *e,
    };
    let side = |src: &str| {
        let (doc, diags) = parse(src);
        if has_errors(&diags) {
            return (None, diags);
        }
        select(&doc, req.context.as_deref())
    };
    let (ca, da) = side(&req.a);
    let (cb, db) = side(&req.b);
    let mut out = json!({ "diagnostics": { "a": diags_json(&da), "b": diags_json(&db) } });
    if let (Some(ca), Some(cb)) = (ca, cb) {
        let r = diff(&ca.context, &cb.context);
        out["edits"] = serde_json::to_value(&r.edits).expect("edits serialize");
        out["cost"] = json!(r.cost);
        out["distance"] = json!(r.distance);
        out["marks"] = serde_json::to_value(&r.marks).expect("marks serialize");
        out["text"] = json!(format_diff(&r, false));
        if req.svg {
            out["svg"] = json!(diff_svg(&r, &cb.context, &theme));
        }
    }
    Json(out).into_response()
}
