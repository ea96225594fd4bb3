//! Replays the two "move forward" episodes against the reference inventory
//! and shows that a changed button text is caught as a mismatch.
//!
//! ```text
//! cargo run --example transcript_replay
//! cargo run --example transcript_replay -- --record fixtures/clarification_transcript.jsonl
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use woz::cli::replay;
use woz::environment::EnvironmentMap;
use woz::inventory::{InventoryDocument, Registry};
use woz::router::transcript::{encode_transcript, read_transcript};
use woz::router::{Clock, ManualClock, Phase, Router};
use woz::SlotBinding;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn load() -> Result<(String, Arc<EnvironmentMap>), Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(fixtures().join("reference_inventory.json"))?;
    let env = EnvironmentMap::load_path(fixtures().join("reference_environment.json"))?;
    Ok((text, Arc::new(env)))
}

/// Drives one session through both episodes with a scripted clock.
fn record(
    registry: Arc<Registry>,
    env: Arc<EnvironmentMap>,
    out: &Path,
) -> Result<(), Box<dyn std::error::Error>> {
    let clock = Arc::new(ManualClock::new(1_500_000_000_000));
    let router = Router::new(registry).with_environment(env).with_clock(clock.clone() as Arc<dyn Clock>);
    let s = router.open_session("P-clarify", Phase::Main1)?.id;
    let none = SlotBinding::new();
    let step = |ms| clock.advance(ms);

    router.ingest_utterance(&s, "robot go forward")?;
    step(4_000);
    router.press_button(&s, "clarify-motion-1", &none)?;
    step(6_000);
    router.ingest_utterance(&s, "robot move forward one feet")?;
    step(3_000);
    router.press_button(&s, "fwd-one/will", &none)?;
    step(500);
    router.press_button(&s, "fwd-one", &none)?;
    step(8_000);
    router.rn_note(&s, "complete")?;
    step(1_000);
    router.press_button(&s, "done", &none)?;

    step(20_000);
    router.ingest_utterance(&s, "can you move forward")?;
    step(3_500);
    router.press_button(&s, "clarify-motion-1", &none)?;
    step(7_000);
    router.ingest_utterance(&s, "can you stop at the second door")?;
    step(2_500);
    router.press_button(&s, "clarify-target-2", &none)?;
    step(5_000);
    router.ingest_utterance(&s, "the living room door")?;
    step(2_000);
    let target = SlotBinding::new().with("TARGET", "Living Room Door");
    router.press_button(&s, "move-to-slot/will", &target)?;
    step(500);
    router.press_button(&s, "move-to-slot", &target)?;

    std::fs::write(out, encode_transcript(&router.export_transcript(&s)?))?;
    println!("recorded {}", out.display());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (text, env) = load()?;
    let registry = Arc::new(Registry::load_with(&text, Some(env.as_ref()))?);

    let args: Vec<String> = std::env::args().skip(1).collect();
    if let [flag, path] = args.as_slice() {
        if flag == "--record" {
            return record(registry, env, Path::new(path));
        }
    }

    let events = read_transcript(fixtures().join("clarification_transcript.jsonl"))?;
    let report = replay(&events, registry, Some(env.clone()));
    print!("{report}");
    let clarifications: Vec<_> =
        events.iter().filter(|e| e.button_id.as_deref() == Some("clarify-motion-1")).map(|e| e.seq).collect();
    println!("clarification presses at seq {clarifications:?}:");
    for (_, seq, text) in report.regenerated.iter().filter(|(_, s, _)| clarifications.contains(s)) {
        println!("  #{seq} {text}");
    }

    // Reword the clarification button and replay again.
    let mut doc = InventoryDocument::from_json(&text)?;
    let button = doc.buttons.iter_mut().find(|b| b.id == "clarify-motion-1").unwrap();
    button.text = "Where should I stop?".into();
    let edited = Arc::new(Registry::load_with(&doc.to_json_pretty(), Some(env.as_ref()))?);
    let report = replay(&events, edited, Some(env));
    println!("after rewording clarify-motion-1:");
    print!("{report}");
    Ok(())
}
