//! Starts the session server on a local port and drives it with three
//! WebSocket clients, one per role.
//!
//! Pass `--serve` to keep the server running on 127.0.0.1:8700 instead.

use std::sync::Arc;

use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;
use woz::inventory::Registry;
use woz::router::Router;
use woz::server;

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn send(ws: &mut Ws, frame: Value) {
    ws.send(Message::text(format!("{frame}\n"))).await.unwrap();
}

async fn recv(ws: &mut Ws) -> Value {
    loop {
        if let Message::Text(t) = ws.next().await.unwrap().unwrap() {
            return serde_json::from_str(t.trim_end()).unwrap();
        }
    }
}

fn show(who: &str, frame: &Value) {
    let p = &frame["payload"];
    match frame["type"].as_str() {
        Some("event") => {
            println!("{who:<12} event #{} {} -> {}: {}", p["seq"], p["sender"], p["recipient"], p["text"])
        }
        other => println!("{who:<12} {} {}", other.unwrap_or("?"), p),
    }
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/reference_base.json");
    let router = Arc::new(Router::new(Arc::new(Registry::load_path(path, None)?)));
    if std::env::args().any(|a| a == "--serve") {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:8700").await?;
        return Ok(server::serve(listener, router).await?);
    }
    let (addr, _server) = server::spawn("127.0.0.1:0".parse()?, router).await?;

    let registry = http_get(&format!("{addr}"), "/registry").await?;
    let doc: Value = serde_json::from_str(&registry)?;
    println!("GET /registry: {} buttons", doc["buttons"].as_array().map_or(0, Vec::len));

    let url = format!("ws://{addr}/ws");
    let (mut dm, _) = tokio_tungstenite::connect_async(&url).await?;
    send(&mut dm, json!({"type": "open", "payload": {"role": "DM_WIZARD", "participant_label": "P01", "phase": "MAIN1"}})).await;
    let opened = recv(&mut dm).await;
    let session = opened["session"].clone();
    show("dm", &opened);

    let (mut participant, _) = tokio_tungstenite::connect_async(&url).await?;
    send(&mut participant, json!({"type": "open", "session": session, "payload": {"role": "PARTICIPANT"}}))
        .await;
    show("participant", &recv(&mut participant).await);
    let (mut rn, _) = tokio_tungstenite::connect_async(&url).await?;
    send(&mut rn, json!({"type": "open", "session": session, "payload": {"role": "RN_WIZARD"}})).await;
    show("rn", &recv(&mut rn).await);

    send(&mut participant, json!({"type": "utterance", "payload": {"text": "move forward two feet"}})).await;
    show("dm", &recv(&mut dm).await);
    send(
        &mut dm,
        json!({"type": "press", "payload": {"button_id": "fwd-slot", "bindings": {"D": "2 feet"}}}),
    )
    .await;
    show("dm", &recv(&mut dm).await);
    show("rn", &recv(&mut rn).await);
    send(&mut rn, json!({"type": "note", "payload": {"text": "complete"}})).await;
    show("dm", &recv(&mut dm).await);
    send(&mut dm, json!({"type": "press", "payload": {"button_id": "done"}})).await;
    show("dm", &recv(&mut dm).await);
    show("participant", &recv(&mut participant).await);
    show("participant", &recv(&mut participant).await);

    send(&mut participant, json!({"type": "press", "payload": {"button_id": "done"}})).await;
    show("participant", &recv(&mut participant).await);
    send(&mut dm, json!({"type": "close"})).await;
    show("dm", &recv(&mut dm).await);
    Ok(())
}

/// Minimal HTTP/1.1 GET so the example needs no HTTP client crate.
async fn http_get(addr: &str, path: &str) -> std::io::Result<String> {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    let mut stream = tokio::net::TcpStream::connect(addr).await?;
    let request = format!("GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n");
    stream.write_all(request.as_bytes()).await?;
    let mut response = String::new();
    stream.read_to_string(&mut response).await?;
    Ok(response.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default())
}
