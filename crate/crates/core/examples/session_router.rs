//! One short session routed through the three roles, printed the way each
//! role sees it.

use std::sync::Arc;

use woz::router::transcript::encode_transcript;
use woz::router::{Phase, Role, Router};
use woz::{inventory::Registry, SlotBinding};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/reference_base.json");
    let router = Router::new(Arc::new(Registry::load_path(path, None)?));
    let s = router.open_session("P07", Phase::Main1)?;
    println!("session {} ({:?}, budget {:?} s)", s.id, s.phase, s.time_budget_secs);
    let id = s.id;

    let three_feet = SlotBinding::new().with("D", "3 feet");
    router.ingest_utterance(&id, "move forward three feet")?;
    router.press_button(&id, "fwd-slot/will", &three_feet)?;
    router.press_button(&id, "fwd-slot", &three_feet)?;
    router.rn_note(&id, "complete")?;
    router.press_button(&id, "fwd-slot/did", &three_feet)?;
    router.press_button(&id, "done", &SlotBinding::new())?;

    if let Err(e) = router.press_button(&id, "fwd-slot", &SlotBinding::new().with("D", "far")) {
        println!("rejected press: {e}");
    }

    let events = router.export_transcript(&id)?;
    for role in [Role::Participant, Role::RnWizard, Role::DmWizard] {
        println!("-- {role:?} sees");
        for e in events.iter().filter(|e| role.receives(e)) {
            println!("  #{} {:?} -> {:?}: {}", e.seq, e.sender, e.recipient, e.text);
        }
    }

    router.close_session(&id)?;
    println!("-- transcript log");
    print!("{}", encode_transcript(&events));
    Ok(())
}
