use std::fs;
use std::path::Path;

use acdl_cli::server::router;
use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn corpus(rel: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(rel)).unwrap()
}

async fn post(path: &str, body: impl Into<Body>) -> (StatusCode, Value) {
    let req = Request::post(path).header("content-type", "application/json").body(body.into()).unwrap();
    let res = router().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn errors(v: &Value) -> usize {
    v.as_array().unwrap().iter().filter(|d| d["severity"] == "error").count()
}

#[tokio::test]
async fn render_tool_agent() {
    let (status, v) = post("/api/render", json!({ "source": corpus("listings/tool_agent.acdl") }).to_string()).await;
    assert_eq!(status, StatusCode::OK);
    let svg = v["svg"].as_str().unwrap();
    assert!(svg.contains("<svg") && svg.contains("data-role=\"S\""));
    assert_eq!(errors(&v["diagnostics"]), 0);
}

#[tokio::test]
async fn malformed_bodies_are_400() {
    for body in ["", "{", "[]", r#"{"src":"x"}"#, r#"{"source":3}"#] {
        let (status, v) = post("/api/render", body.to_string()).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert!(v["error"].is_string());
    }
    let (status, _) = post("/api/expand", json!({ "source": "P[@T]: {\n}\n", "env": { "time": [] } }).to_string()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post("/api/render", json!({ "source": "", "theme": { "font_size": -1 } }).to_string()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn diagnostics_stay_200() {
    let (status, v) = post("/api/render", json!({ "source": "P[@T]: {\n  U: {\n    S: INSTRUCTIONS\n  }\n}\n" }).to_string()).await;
    assert_eq!(status, StatusCode::OK);
    let d = v["diagnostics"].as_array().unwrap();
    assert_eq!(d.len(), 1);
    assert_eq!(d[0]["code"], "E-NESTED-ROLE");
    assert_eq!(d[0]["span"]["line"], 3);
}

#[tokio::test]
async fn parse_returns_ast_when_clean() {
    let (_, v) = post("/api/parse", json!({ "source": corpus("listings/basic_rag.acdl") }).to_string()).await;
    assert!(v["ast"].is_object());
    let (_, v) = post("/api/parse", json!({ "source": "P[@T]: {" }).to_string()).await;
    assert!(v.get("ast").is_none());
    assert!(errors(&v["diagnostics"]) >= 1);
    let (status, v) = post("/api/parse", json!({ "source": "" }).to_string()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["diagnostics"], json!([]));
}

#[tokio::test]
async fn expand_endpoint() {
    let env: Value = serde_json::from_str(&corpus("env/react1_t3.json")).unwrap();
    let body = json!({ "source": corpus("fixtures/react1.acdl"), "context": "React1", "env": env });
    let (status, v) = post("/api/expand", body.to_string()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["expanded"]["messages"].as_array().unwrap().len(), 6);
    let body = json!({ "source": corpus("fixtures/react1.acdl"), "context": "Nope", "env": env });
    let (_, v) = post("/api/expand", body.to_string()).await;
    assert!(v["expanded"].is_null());
    assert_eq!(v["diagnostics"][0]["code"], "E-NO-CONTEXT");
}

#[tokio::test]
async fn render_with_env_is_the_instance_view() {
    let env: Value = serde_json::from_str(&corpus("env/react1_t2.json")).unwrap();
    let body = json!({ "source": corpus("fixtures/react1.acdl"), "env": env });
    let (_, v) = post("/api/render", body.to_string()).await;
    assert_eq!(v["svg"].as_str().unwrap().matches("data-role=").count(), 4);
}

#[tokio::test]
async fn diff_endpoint() {
    let body = json!({ "a": corpus("fixtures/mint.acdl"), "b": corpus("fixtures/mint_tool_role.acdl"), "svg": true });
    let (status, v) = post("/api/diff", body.to_string()).await;
    assert_eq!(status, StatusCode::OK);
    let edits = v["edits"].as_array().unwrap();
    assert_eq!(edits.len(), 1);
    assert_eq!(edits[0]["edit"], "ReplaceRole");
    assert!(v["svg"].as_str().unwrap().contains("data-diff=\"changed\""));
}

#[tokio::test]
async fn status_page() {
    let res = router().oneshot(Request::get("/").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    assert!(String::from_utf8_lossy(&bytes).contains("/api/render"));
}

#[tokio::test]
async fn concurrent_requests_agree() {
    let src = corpus("listings/tool_agent.acdl");
    let mut tasks = Vec::new();
    for _ in 0..16 {
        let body = json!({ "source": src }).to_string();
        tasks.push(tokio::spawn(async move { post("/api/render", body).await.1["svg"].as_str().unwrap().to_string() }));
    }
    let mut outs = Vec::new();
    for t in tasks {
        outs.push(t.await.unwrap());
    }
    assert!(outs.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test]
async fn serves_on_localhost() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router()).await.unwrap() });
    let mut s = tokio::net::TcpStream::connect(addr).await.unwrap();
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    s.write_all(b"GET / HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").await.unwrap();
    let mut buf = Vec::new();
    s.read_to_end(&mut buf).await.unwrap();
    assert!(String::from_utf8_lossy(&buf).starts_with("HTTP/1.1 200"));
}
