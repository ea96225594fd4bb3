//! Builds the reference inventory: the hand-written base buttons merged with
//! the buttons generated from the reference environment map.
//!
//! ```text
//! cargo run --example reference_inventory                # print a summary
//! cargo run --example reference_inventory -- out.json    # also write the merged document
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use woz::environment::EnvironmentMap;
use woz::inventory::{InventoryDocument, Registry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let base = std::fs::read_to_string(fixtures.join("reference_base.json"))?;
    let env = EnvironmentMap::load_path(fixtures.join("reference_environment.json"))?;

    let mut doc = InventoryDocument::from_json(&base)?;
    let base_count = doc.buttons.len();
    doc.merge(env.inventory_fragment());
    let text = doc.to_json_pretty() + "\n";

    let registry = Registry::load_with(&text, Some(&env))?;
    println!(
        "{} buttons ({} hand-written, {} generated) across {} tabs",
        registry.button_count(),
        base_count,
        registry.button_count() - base_count,
        registry.tab_count()
    );
    for tab in registry.tabs() {
        let placed: usize = tab.rows.iter().map(|r| r.button_ids.len()).sum();
        println!("  {:<16} {:>3} rows {:>4} placements", tab.title, tab.rows.len(), placed);
    }

    let mut by_color = BTreeMap::new();
    for b in registry.buttons() {
        *by_color.entry(format!("{:?}", b.color_class())).or_insert(0) += 1;
    }
    println!("color classes: {by_color:?}");
    println!("hover for clarify-motion-1: {}", registry.hover_text("clarify-motion-1")?);

    if let Some(out) = std::env::args().nth(1) {
        std::fs::write(&out, &text)?;
        println!("wrote {out} (sha256 {})", registry.source_hash());
    }
    Ok(())
}
