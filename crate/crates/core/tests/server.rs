mod common;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio_tungstenite::tungstenite::Message;

use common::fixture;
use woz::inventory::Registry;
use woz::router::transcript::read_transcript;
use woz::router::Router;
use woz::server;

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn start(router: Router) -> (SocketAddr, Arc<Router>) {
    let router = Arc::new(router);
    let (addr, _handle) = server::spawn("127.0.0.1:0".parse().unwrap(), router.clone()).await.unwrap();
    (addr, router)
}

fn base_router() -> Router {
    Router::new(Arc::new(Registry::load_path(fixture("reference_base.json"), None).unwrap()))
}

async fn connect(addr: SocketAddr) -> Ws {
    tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap().0
}

async fn send(ws: &mut Ws, frame: Value) {
    ws.send(Message::text(format!("{frame}\n"))).await.unwrap();
}

async fn recv(ws: &mut Ws) -> Value {
    let next = tokio::time::timeout(Duration::from_secs(5), async {
        loop {
            match ws.next().await.expect("stream ended").unwrap() {
                Message::Text(t) => return serde_json::from_str::<Value>(t.trim_end()).unwrap(),
                _ => continue,
            }
        }
    });
    next.await.expect("no frame within 5s")
}

async fn assert_silent(ws: &mut Ws) {
    let r = tokio::time::timeout(Duration::from_millis(150), ws.next()).await;
    assert!(r.is_err(), "unexpected frame: {r:?}");
}

async fn open_dm(ws: &mut Ws) -> Value {
    send(ws, json!({"type": "open", "payload": {"role": "DM_WIZARD", "participant_label": "P01", "phase": "MAIN1"}}))
        .await;
    let opened = recv(ws).await;
    assert_eq!(opened["type"], "open", "{opened}");
    opened["session"].clone()
}

async fn attach(ws: &mut Ws, session: &Value, role: &str, since: Option<u64>) -> Value {
    let mut payload = json!({"role": role});
    if let Some(s) = since {
        payload["since_seq"] = json!(s);
    }
    send(ws, json!({"type": "open", "session": session, "payload": payload})).await;
    recv(ws).await
}

fn error_code(frame: &Value) -> &str {
    assert_eq!(frame["type"], "error", "{frame}");
    frame["payload"]["code"].as_str().unwrap()
}

#[tokio::test]
async fn registry_endpoint_serves_the_source_document() {
    let path = fixture("reference_base.json");
    let (addr, _) = start(base_router()).await;
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    let req = format!("GET /registry HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n");
    stream.write_all(req.as_bytes()).await.unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).await.unwrap();
    let (head, body) = response.split_once("\r\n\r\n").unwrap();
    assert!(head.starts_with("HTTP/1.1 200"), "{head}");
    assert!(head.to_ascii_lowercase().contains("application/json"), "{head}");
    assert_eq!(body, std::fs::read_to_string(path).unwrap());
}

#[tokio::test]
async fn frames_before_open_are_rejected() {
    let (addr, _) = start(base_router()).await;
    let mut ws = connect(addr).await;
    send(&mut ws, json!({"type": "utterance", "payload": {"text": "hello"}})).await;
    assert_eq!(error_code(&recv(&mut ws).await), "NOT_OPEN");
    ws.send(Message::text("not json\n")).await.unwrap();
    assert_eq!(error_code(&recv(&mut ws).await), "BAD_FRAME");
    send(&mut ws, json!({"type": "open", "payload": {"role": "PARTICIPANT"}})).await;
    assert_eq!(error_code(&recv(&mut ws).await), "FORBIDDEN");
}

#[tokio::test]
async fn roles_are_enforced_per_frame_type() {
    let (addr, router) = start(base_router()).await;
    let mut dm = connect(addr).await;
    let session = open_dm(&mut dm).await;
    let mut participant = connect(addr).await;
    assert_eq!(attach(&mut participant, &session, "PARTICIPANT", None).await["type"], "open");

    send(&mut participant, json!({"type": "press", "payload": {"button_id": "done"}})).await;
    let err = recv(&mut participant).await;
    assert_eq!(error_code(&err), "FORBIDDEN");
    assert!(err["payload"]["message"].as_str().unwrap().contains("DM_WIZARD"));

    send(&mut dm, json!({"type": "note", "payload": {"text": "complete"}})).await;
    assert_eq!(error_code(&recv(&mut dm).await), "FORBIDDEN");
    send(&mut dm, json!({"type": "press", "payload": {"button_id": "no-such-button"}})).await;
    assert_eq!(error_code(&recv(&mut dm).await), "UNKNOWN_BUTTON");
    send(&mut dm, json!({"type": "event", "payload": {}})).await;
    assert_eq!(error_code(&recv(&mut dm).await), "BAD_FRAME");

    let id = woz::router::SessionId::new(session.as_str().unwrap());
    assert!(router.export_transcript(&id).unwrap().is_empty());
}

#[tokio::test]
async fn one_connection_per_role_until_it_leaves() {
    let (addr, _) = start(base_router()).await;
    let mut dm = connect(addr).await;
    let session = open_dm(&mut dm).await;
    let mut first = connect(addr).await;
    assert_eq!(attach(&mut first, &session, "PARTICIPANT", None).await["type"], "open");
    let mut second = connect(addr).await;
    assert_eq!(error_code(&attach(&mut second, &session, "PARTICIPANT", None).await), "ROLE_TAKEN");

    first.close(None).await.unwrap();
    drop(first);
    let mut reopened = None;
    for _ in 0..50 {
        let frame = attach(&mut second, &session, "PARTICIPANT", None).await;
        if frame["type"] == "open" {
            reopened = Some(frame);
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    assert!(reopened.is_some(), "role was never released");

    let mut dm2 = connect(addr).await;
    assert_eq!(error_code(&attach(&mut dm2, &session, "DM_WIZARD", None).await), "ROLE_TAKEN");
    send(&mut dm2, json!({"type": "open", "session": "missing", "payload": {"role": "RN_WIZARD"}})).await;
    assert_eq!(error_code(&recv(&mut dm2).await), "UNKNOWN_SESSION");
}

#[tokio::test]
async fn events_reach_exactly_their_audience() {
    let (addr, _) = start(base_router()).await;
    let mut dm = connect(addr).await;
    let session = open_dm(&mut dm).await;
    let mut participant = connect(addr).await;
    attach(&mut participant, &session, "PARTICIPANT", None).await;
    let mut rn = connect(addr).await;
    attach(&mut rn, &session, "RN_WIZARD", None).await;

    send(&mut participant, json!({"type": "utterance", "payload": {"text": "move forward two feet"}})).await;
    let utterance = recv(&mut dm).await;
    assert_eq!(utterance["payload"]["seq"], 1);
    assert_eq!(utterance["payload"]["recipient"], "DM_WIZARD");
    assert_eq!(recv(&mut participant).await, utterance, "the sender sees its own chat line");
    assert_silent(&mut rn).await;

    send(
        &mut dm,
        json!({"type": "press", "payload": {"button_id": "fwd-slot", "bindings": {"D": "2 feet"}}}),
    )
    .await;
    let press = recv(&mut dm).await;
    assert_eq!(press["payload"]["text"], "move forward 2 feet");
    assert_eq!(recv(&mut rn).await["payload"]["seq"], 2);
    assert_silent(&mut participant).await;

    send(&mut dm, json!({"type": "press", "payload": {"button_id": "done"}})).await;
    assert_eq!(recv(&mut dm).await["payload"]["seq"], 3);
    let done = recv(&mut participant).await;
    assert_eq!(done["payload"]["text"], "done");
    assert_silent(&mut rn).await;
}

#[tokio::test]
async fn resume_after_since_seq_without_gaps_or_duplicates() {
    let (addr, _) = start(base_router()).await;
    let mut dm = connect(addr).await;
    let session = open_dm(&mut dm).await;
    let mut participant = connect(addr).await;
    attach(&mut participant, &session, "PARTICIPANT", None).await;
    for i in 0..6 {
        send(&mut participant, json!({"type": "utterance", "payload": {"text": format!("hello {i}")}})).await;
        recv(&mut dm).await;
    }
    drop(dm);

    let mut dm = connect(addr).await;
    let mut opened = None;
    for _ in 0..50 {
        let frame = attach(&mut dm, &session, "DM_WIZARD", Some(3)).await;
        if frame["type"] == "open" {
            opened = Some(frame);
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    assert!(opened.is_some());
    let mut seqs = Vec::new();
    for _ in 0..3 {
        seqs.push(recv(&mut dm).await["payload"]["seq"].as_u64().unwrap());
    }
    send(&mut participant, json!({"type": "utterance", "payload": {"text": "one more"}})).await;
    seqs.push(recv(&mut dm).await["payload"]["seq"].as_u64().unwrap());
    assert_eq!(seqs, vec![4, 5, 6, 7]);
    assert_silent(&mut dm).await;
}

#[tokio::test]
async fn dm_close_ends_the_session_and_others_only_leave() {
    let dir = tempfile::tempdir().unwrap();
    let (addr, router) = start(base_router().with_log_dir(dir.path())).await;
    let mut dm = connect(addr).await;
    let session = open_dm(&mut dm).await;
    let mut rn = connect(addr).await;
    attach(&mut rn, &session, "RN_WIZARD", None).await;
    send(&mut rn, json!({"type": "note", "payload": {"text": "complete"}})).await;
    assert_eq!(recv(&mut dm).await, recv(&mut rn).await);

    send(&mut rn, json!({"type": "close"})).await;
    let left = recv(&mut rn).await;
    assert_eq!(left["type"], "close");
    assert_eq!(left["payload"]["status"], "OPEN", "{left}");

    send(&mut dm, json!({"type": "close"})).await;
    let closed = recv(&mut dm).await;
    assert_eq!(closed["type"], "close");
    assert_eq!(closed["payload"]["status"], "CLOSED", "{closed}");

    let mut late = connect(addr).await;
    attach(&mut late, &session, "PARTICIPANT", None).await;
    send(&mut late, json!({"type": "utterance", "payload": {"text": "hello"}})).await;
    assert_eq!(error_code(&recv(&mut late).await), "SESSION_CLOSED");

    let id = woz::router::SessionId::new(session.as_str().unwrap());
    let log = dir.path().join(format!("{}.jsonl", id.as_str()));
    assert_eq!(read_transcript(log).unwrap(), router.export_transcript(&id).unwrap());
}
