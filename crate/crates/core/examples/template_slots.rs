//! Filling slotted templates and recovering bindings from typed messages.

use woz::template::TemplateError;
use woz::{normalize, MessageTemplate, SlotBinding};

fn main() -> Result<(), TemplateError> {
    let forward = MessageTemplate::parse("move forward {D:DISTANCE}")?;
    let text = forward.fill(&SlotBinding::new().with("D", "3 feet"), None)?;
    println!("{:<28} -> {text}", forward.raw());
    println!("{:<28} -> {}", "(hover)", forward.display_text());

    for typed in ["Move forward 12 feet.", "move  forward 1.5 m", "move forward a bit"] {
        match forward.match_utterance(typed, None) {
            Some(b) => println!("{typed:<28} matches, D = {:?}", b.get("D").unwrap()),
            None => println!("{typed:<28} does not match"),
        }
    }

    let mut turn = MessageTemplate::parse("turn {DIR:FREE_TEXT} {A:ANGLE}")?;
    turn.slot_mut("A").unwrap().range = Some(0.0..=360.0);
    let bad = turn.fill(&SlotBinding::new().with("DIR", "left").with("A", "400 degrees"), None);
    println!("turn left 400 degrees        -> {}", bad.unwrap_err());
    let ok = turn.match_utterance("turn sharp left 90 degrees", None).unwrap();
    println!("turn sharp left 90 degrees   -> DIR={:?} A={:?}", ok.get("DIR").unwrap(), ok.get("A").unwrap());

    for broken in ["go {D:DISTANCE", "{X:FREE_TEXT}", "go {a:NUMBER}", "go {D:SPEED}"] {
        println!("{broken:<28} -> {}", MessageTemplate::parse(broken).unwrap_err());
    }

    println!("normalize(\"  Hmmm...  \") = {:?}", normalize("  Hmmm...  "));
    Ok(())
}
