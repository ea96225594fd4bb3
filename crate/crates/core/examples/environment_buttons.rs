//! Generates navigation buttons from an environment map.
//!
//! With a path argument the map is read from that file; otherwise a small
//! two-room map is used. Prints the generated fragment summary and the first
//! few buttons.

use woz::environment::{expected_button_count, EntityKind, EnvironmentMap};

const SMALL_MAP: &str = r#"{
  "spaces": [
    {"id": "Kitchen", "kind": "ROOM"},
    {"id": "Hallway", "kind": "HALLWAY"}
  ],
  "doorways": [{"id": "Kitchen Door", "space": "Kitchen"}],
  "objects": [{"id": "Red Crate", "space": "Kitchen"}],
  "areas": [["Kitchen", "Hallway"]]
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let map = match std::env::args().nth(1) {
        Some(path) => EnvironmentMap::load_path(path)?,
        None => EnvironmentMap::from_json(SMALL_MAP)?,
    };
    let (s, d, o) = (
        map.count(EntityKind::Room) + map.count(EntityKind::Hallway),
        map.count(EntityKind::Doorway),
        map.count(EntityKind::Object),
    );
    let buttons = map.generate_entity_buttons();
    println!(
        "{s} spaces, {d} doorways, {o} objects -> {} buttons (3S + 12D + 3O = {})",
        buttons.len(),
        expected_button_count(s, d, o)
    );
    for b in buttons.iter().take(15) {
        let semantics = b.semantics.as_ref().map(|m| format!(" {m:?}")).unwrap_or_default();
        println!("  {:<40} {:<12?} {}{semantics}", b.id, b.recipient, b.template.raw());
    }

    let fragment = map.inventory_fragment();
    println!(
        "fragment: {} buttons in tabs {:?}",
        fragment.buttons.len(),
        fragment.tabs.iter().map(|t| t.title.as_str()).collect::<Vec<_>>()
    );
    Ok(())
}
