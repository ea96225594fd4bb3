mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

use common::fixture;

fn woz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_woz")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_json(dir: &Path, name: &str, doc: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(doc).unwrap()).unwrap();
    p
}

fn base_doc() -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixture("reference_base.json")).unwrap()).unwrap()
}

fn edit_button(doc: &mut Value, id: &str, edit: impl FnOnce(&mut Value)) {
    let button = doc["buttons"].as_array_mut().unwrap().iter_mut().find(|b| b["id"] == id).unwrap();
    edit(button);
}

#[test]
fn validate_accepts_the_reference_inventory() {
    let inv = fixture("reference_inventory.json");
    let env = fixture("reference_environment.json");
    let out = woz(&["validate", "--inventory", path(&inv), "--env-map", path(&env)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "ok: 404 buttons, 5 tabs\n");

    let out = woz(&["validate", "--inventory", path(&fixture("reference_base.json")), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["buttons"], 200);
    assert_eq!(report["diagnostics"], json!([]));
}

#[test]
fn validate_reports_a_dangling_feedback_reference() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = base_doc();
    edit_button(&mut doc, "fwd-one", |b| b["paired_feedback"][1] = json!("fwd-one/nowhere"));
    let inv = write_json(dir.path(), "inv.json", &doc);
    let out = woz(&["validate", "--inventory", path(&inv)]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "{text}");
    assert!(lines[0].contains("fwd-one/nowhere"), "{text}");
}

#[test]
fn validate_reports_an_unknown_slot_kind() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = base_doc();
    edit_button(&mut doc, "fwd-one", |b| b["text"] = json!("move forward {D:SPEED}"));
    let inv = write_json(dir.path(), "inv.json", &doc);
    let out = woz(&["validate", "--inventory", path(&inv), "--format", "json"]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let diags = report["diagnostics"].as_array().unwrap();
    assert_eq!(diags.len(), 1, "{report}");
    assert!(diags[0]["location"].as_str().unwrap().contains("fwd-one"), "{report}");
}

#[test]
fn generate_env_emits_one_fragment_per_map() {
    let dir = tempfile::tempdir().unwrap();
    let one = json!({
        "spaces": [{"id": "Kitchen", "kind": "ROOM"}],
        "doorways": [{"id": "Kitchen Door", "space": "Kitchen"}],
        "objects": [],
        "areas": [["Kitchen"]],
    });
    let out = woz(&["generate-env", path(&write_json(dir.path(), "one.json", &one))]);
    assert_eq!(out.status.code(), Some(0));
    let fragment: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(fragment["buttons"].as_array().unwrap().len(), 15);

    let empty = json!({"spaces": [], "doorways": [], "objects": [], "areas": []});
    let out = woz(&["generate-env", path(&write_json(dir.path(), "empty.json", &empty))]);
    assert_eq!(out.status.code(), Some(0));
    let fragment: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(fragment["buttons"], json!([]));

    let dup = json!({
        "spaces": [{"id": "Kitchen", "kind": "ROOM"}, {"id": "Kitchen", "kind": "HALLWAY"}],
        "doorways": [], "objects": [], "areas": [["Kitchen"]],
    });
    let out = woz(&["generate-env", path(&write_json(dir.path(), "dup.json", &dup))]);
    assert_ne!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
}

#[test]
fn analyze_frequency_text_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    std::fs::write(&corpus, "3\tgo left\nstop\nStop.\nturn right\n").unwrap();
    let out = woz(&["analyze", "frequency", "--corpus", path(&corpus)]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("total: 6\n"), "{text}");
    assert!(text.contains("repeated_total: 5\n"), "{text}");

    let report_path = dir.path().join("freq.json");
    let out = woz(&[
        "analyze",
        "frequency",
        "--corpus",
        path(&corpus),
        "--format",
        "json",
        "--out",
        path(&report_path),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let saved = std::fs::read_to_string(&report_path).unwrap();
    assert_eq!(saved, stdout(&out));
    let report: Value = serde_json::from_str(&saved).unwrap();
    assert_eq!(report["unique"], 3);
    assert_eq!(report["singletons"], json!(["turn right"]));

    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(woz(&["analyze", "frequency", "--corpus", path(&empty)]).status.code(), Some(2));
}

#[test]
fn analyze_coverage_partitions_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    std::fs::write(&corpus, "2\tstop\nmove forward 3 feet\nsing a song please\n").unwrap();
    let inv = fixture("reference_base.json");
    let out = woz(&[
        "analyze",
        "coverage",
        "--corpus",
        path(&corpus),
        "--inventory",
        path(&inv),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(r["total"], 4);
    assert_eq!(r["exact"], 2);
    assert_eq!(r["partial"], 1);
    assert_eq!(r["none"], 1);
    let classes: Vec<&str> =
        r["messages"].as_array().unwrap().iter().map(|m| m["class"].as_str().unwrap()).collect();
    assert_eq!(classes, ["EXACT", "PARTIAL", "NONE"]);
}

#[test]
fn analyze_pacing_counts_completions() {
    let log = fixture("clarification_transcript.jsonl");
    let out = woz(&["analyze", "pacing", "--log", path(&log), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(r["completion_count"], 1);

    let out = woz(&["analyze", "pacing", "--log", path(&log), "--compare", path(&log)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("delta: 0"), "{}", stdout(&out));
}

#[test]
fn replay_regenerates_the_logged_transcript() {
    let t = fixture("clarification_transcript.jsonl");
    let inv = fixture("reference_inventory.json");
    let env = fixture("reference_environment.json");
    let out = woz(&["replay", "--transcript", path(&t), "--inventory", path(&inv), "--env-map", path(&env)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("mismatches: 0"));
}

#[test]
fn replay_names_a_button_whose_text_changed() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("reference_inventory.json")).unwrap()).unwrap();
    edit_button(&mut doc, "fwd-one", |b| b["text"] = json!("move ahead one foot"));
    let inv = write_json(dir.path(), "inv.json", &doc);
    let t = fixture("clarification_transcript.jsonl");
    let env = fixture("reference_environment.json");
    let out = woz(&[
        "replay",
        "--transcript",
        path(&t),
        "--inventory",
        path(&inv),
        "--env-map",
        path(&env),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let r: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let mismatches = r["mismatches"].as_array().unwrap();
    assert_eq!(mismatches.len(), 1, "{r}");
    assert_eq!(mismatches[0]["button_id"], "fwd-one");
}

#[test]
fn serve_answers_registry_requests() {
    use std::io::{Read, Write};
    use std::net::{TcpListener, TcpStream};
    use std::time::{Duration, Instant};

    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let inv = fixture("reference_base.json");
    let mut child = Command::new(env!("CARGO_BIN_EXE_woz"))
        .args(["serve", "--inventory", path(&inv)])
        .env("WOZ_LISTEN", &addr)
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(10);
    let stream = loop {
        match TcpStream::connect(&addr) {
            Ok(s) => break s,
            Err(_) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(50)),
            Err(e) => {
                let _ = child.kill();
                panic!("server never listened: {e}");
            }
        }
    };
    let mut stream = stream;
    write!(stream, "GET /registry HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    let _ = child.kill();
    let _ = child.wait();
    let body = response.split_once("\r\n\r\n").unwrap().1;
    assert_eq!(body, std::fs::read_to_string(inv).unwrap());
}
