use std::net::SocketAddr;

use gotcha::authcore::{AuthConfig, HashCost};
use gotcha::authservice::{bind, ServiceConfig, ServiceError};
use gotcha::gotcha::PuzzleParams;
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

async fn http(addr: SocketAddr, method: &str, path: &str, body: &str) -> (u16, Vec<u8>) {
    let mut s = TcpStream::connect(addr).await.unwrap();
    let req = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    s.write_all(req.as_bytes()).await.unwrap();
    let mut raw = Vec::new();
    s.read_to_end(&mut raw).await.unwrap();
    let split = raw.windows(4).position(|w| w == b"\r\n\r\n").unwrap();
    let head = String::from_utf8_lossy(&raw[..split]).to_string();
    let status: u16 = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    let mut body = raw[split + 4..].to_vec();
    if head.to_ascii_lowercase().contains("transfer-encoding: chunked") {
        body = dechunk(&body);
    }
    (status, body)
}

fn dechunk(mut data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    loop {
        let eol = data.windows(2).position(|w| w == b"\r\n").unwrap();
        let size = usize::from_str_radix(std::str::from_utf8(&data[..eol]).unwrap().trim(), 16).unwrap();
        if size == 0 {
            return out;
        }
        out.extend_from_slice(&data[eol + 2..eol + 2 + size]);
        data = &data[eol + 4 + size..];
    }
}

async fn json_call(addr: SocketAddr, method: &str, path: &str, body: Value) -> (u16, Value) {
    let (s, b) = http(addr, method, path, &body.to_string()).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn config(store: Option<std::path::PathBuf>) -> ServiceConfig {
    ServiceConfig {
        bind: "127.0.0.1:0".parse().unwrap(),
        store_path: store,
        auth: AuthConfig { params: PuzzleParams::new(3, 1).unwrap(), hash_cost: HashCost::MIN, ..AuthConfig::default() },
        ..ServiceConfig::default()
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn register_and_login_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("accounts.tsv");
    let bound = bind(&config(Some(store.clone()))).await.unwrap();
    let addr = bound.local_addr().unwrap();
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(bound.run_until(async {
        let _ = stop_rx.await;
    }));

    let (s, v) = json_call(addr, "GET", "/health", Value::Null).await;
    assert_eq!(s, 200);
    assert_eq!(v["version"], 1);
    assert!(v["payload"]["store"].as_str().unwrap().starts_with("file:"));

    let (_, v) = json_call(addr, "POST", "/register/begin", json!({"username": "eve", "password": "hunter2"})).await;
    let session = v["payload"]["session"].as_str().unwrap().to_string();
    let mut presented = Vec::new();
    for url in v["payload"]["images"].as_array().unwrap() {
        let (s, png) = http(addr, "GET", url.as_str().unwrap(), "").await;
        assert_eq!(s, 200);
        presented.push(png);
    }
    let (s, v) =
        json_call(addr, "POST", "/register/complete", json!({"session": session, "labels": ["kite", "bell", "moth"]})).await;
    assert_eq!(s, 200, "{v}");

    let (_, v) = json_call(addr, "POST", "/login/begin", json!({"username": "eve", "password": "hunter2"})).await;
    let login = v["payload"]["session"].as_str().unwrap().to_string();
    let mut canonical = Vec::new();
    for url in v["payload"]["images"].as_array().unwrap() {
        canonical.push(http(addr, "GET", url.as_str().unwrap(), "").await.1);
    }
    let wire: Vec<usize> = presented.iter().map(|p| canonical.iter().position(|c| c == p).unwrap() + 1).collect();
    let (s, v) = json_call(addr, "POST", "/login/complete", json!({"session": login, "assignment": wire})).await;
    assert_eq!(s, 200);
    assert_eq!(v["payload"]["accepted"], true);

    // Images die with their session.
    let (s, _) = http(addr, "GET", &format!("/inkblot/{login}/1"), "").await;
    assert_eq!(s, 404);

    let (_, v) = json_call(addr, "POST", "/login/begin", json!({"username": "eve", "password": "wrong"})).await;
    let login = v["payload"]["session"].as_str().unwrap().to_string();
    let (_, v) = json_call(addr, "POST", "/login/complete", json!({"session": login, "assignment": wire})).await;
    assert_eq!(v["payload"]["accepted"], false);

    let (s, v) = json_call(addr, "POST", "/login/begin", json!({"username": "nobody", "password": "x"})).await;
    assert_eq!(s, 200, "unknown users get a challenge too");
    assert_eq!(v["payload"]["labels"].as_array().unwrap().len(), 3);

    stop_tx.send(()).unwrap();
    server.await.unwrap().unwrap();
    assert!(std::fs::read_to_string(&store).unwrap().lines().count() == 2);
}

#[tokio::test]
async fn corrupt_store_refuses_to_start() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("accounts.tsv");
    std::fs::write(&store, "GOTCHA-ACCOUNTS\tv1\ngarbage\n").unwrap();
    assert!(matches!(bind(&config(Some(store))).await, Err(ServiceError::Store(_))));
}

#[tokio::test]
async fn occupied_port_is_a_bind_error() {
    let first = bind(&config(None)).await.unwrap();
    let mut c = config(None);
    c.bind = first.local_addr().unwrap();
    assert!(matches!(bind(&c).await, Err(ServiceError::Bind { .. })));
}
