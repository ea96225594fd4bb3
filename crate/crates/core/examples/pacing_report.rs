//! Counts completion feedback in a transcript and compares two experiment
//! totals.

use woz::analytics::{compare_pacing, pacing, PacingReport};
use woz::router::transcript::read_transcript;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/clarification_transcript.jsonl");
    let events = read_transcript(path)?;
    let report = pacing(&events);
    println!("clarification transcript: {} events", events.len());
    print!("{report}");

    // Completion feedback totals of two experiment rounds.
    let first = PacingReport::new(829, 0);
    let second = PacingReport::new(1069, 0);
    let cmp = compare_pacing(&first, &second)?;
    println!("second round vs first: {:+} instances, ratio {:.3}", cmp.delta, cmp.ratio);
    Ok(())
}
