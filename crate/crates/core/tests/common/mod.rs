//! Fixtures, generators and independent oracles shared by the integration
//! tests. Oracles here are written from the stated rules, not by calling
//! into the library under test.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};
use woz::environment::EnvironmentMap;
use woz::inventory::Registry;
use woz::template::Segment;
use woz::{MessageTemplate, SlotBinding, SlotKind};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn reference_environment() -> EnvironmentMap {
    EnvironmentMap::load_path(fixture("reference_environment.json")).unwrap()
}

pub fn reference_registry(env: &EnvironmentMap) -> Registry {
    Registry::load_path(fixture("reference_inventory.json"), Some(env)).unwrap()
}

// --- oracles -----------------------------------------------------------------

/// Lowercase, collapse whitespace, and strip trailing `.!?` the way the
/// comparison rules describe: an odd-length trailing run of terminal
/// punctuation loses one character, until stable.
pub fn oracle_normalize(s: &str) -> String {
    let mut out: String = s
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .chars()
        .flat_map(|c| {
            let lower: Vec<char> = c.to_lowercase().collect();
            if lower.len() == 1 {
                lower
            } else {
                vec![c]
            }
        })
        .collect();
    loop {
        let run = out.chars().rev().take_while(|c| matches!(c, '.' | '!' | '?')).count();
        if run % 2 == 1 {
            out.pop();
            let trimmed = out.trim_end().len();
            out.truncate(trimmed);
        } else {
            return out;
        }
    }
}

pub fn oracle_tokens(normalized: &str) -> BTreeSet<String> {
    normalized
        .split(' ')
        .map(|t| {
            let chars: Vec<char> = t.chars().collect();
            let start = chars.iter().position(|c| c.is_alphanumeric());
            let end = chars.iter().rposition(|c| c.is_alphanumeric());
            match (start, end) {
                (Some(s), Some(e)) => chars[s..=e].iter().collect(),
                _ => String::new(),
            }
        })
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn oracle_jaccard(a: &str, b: &str) -> f64 {
    let (a, b) = (oracle_tokens(a), oracle_tokens(b));
    let inter = a.intersection(&b).count();
    let union = a.union(&b).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Plain substitution of `{NAME:KIND}` markers.
pub fn oracle_fill(raw: &str, binding: &SlotBinding) -> String {
    let mut out = String::new();
    let mut rest = raw;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = rest[open..].find('}').unwrap() + open;
        let name = rest[open + 1..close].split(':').next().unwrap();
        out.push_str(binding.get(name).unwrap());
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    out
}

/// Every button id a map should generate: one move-into per space, four
/// actions per doorway, one move-to per object, each with will/did feedback.
pub fn oracle_env_ids(doc: &Value) -> BTreeSet<String> {
    let mut ids = BTreeSet::new();
    let mut add = |action: &str, id: &str| {
        for suffix in ["", "/will", "/did"] {
            ids.insert(format!("{action}@{id}{suffix}"));
        }
    };
    for s in doc["spaces"].as_array().unwrap() {
        add("move-into", s["id"].as_str().unwrap());
    }
    for d in doc["doorways"].as_array().unwrap() {
        for action in ["move-to", "move-parallel", "move-through", "turn-to-face"] {
            add(action, d["id"].as_str().unwrap());
        }
    }
    for o in doc["objects"].as_array().unwrap() {
        add("move-to", o["id"].as_str().unwrap());
    }
    ids
}

// --- generators --------------------------------------------------------------

pub const WORDS: &[&str] = &[
    "move", "turn", "go", "the", "left", "right", "door", "chair", "crate", "forward", "back", "stop",
    "face", "room", "hallway", "near", "second", "red", "blue", "table", "window", "slowly",
];

pub fn word(rng: &mut impl Rng) -> &'static str {
    WORDS.choose(rng).unwrap()
}

pub fn number(rng: &mut impl Rng) -> String {
    if rng.gen_bool(0.3) {
        format!("{}.{}", rng.gen_range(0..100), rng.gen_range(0..10))
    } else {
        rng.gen_range(0..400).to_string()
    }
}

/// A value that satisfies a slot of `kind` with default constraints.
pub fn fill_value(kind: SlotKind, rng: &mut impl Rng, entities: &[String]) -> String {
    match kind {
        SlotKind::FreeText => (0..rng.gen_range(1..4)).map(|_| word(rng)).collect::<Vec<_>>().join(" "),
        SlotKind::Number => number(rng),
        SlotKind::Distance => {
            let unit = ["feet", "meters", "inches", "ft", "m"].choose(rng).unwrap();
            format!("{} {unit}", number(rng))
        }
        SlotKind::Angle => format!("{} degrees", number(rng)),
        SlotKind::EntityId => entities.choose(rng).cloned().unwrap_or_else(|| "Kitchen".into()),
    }
}

pub fn random_binding(t: &MessageTemplate, rng: &mut impl Rng, entities: &[String]) -> SlotBinding {
    t.slots().iter().map(|s| (s.name.clone(), fill_value(s.kind, rng, entities))).collect()
}

/// A random well-formed template: words with slots between them, at least
/// one word, never two slots in a row.
pub fn random_template(rng: &mut impl Rng, allow_entity: bool) -> String {
    let kinds: &[SlotKind] = if allow_entity {
        &SlotKind::ALL
    } else {
        &[SlotKind::FreeText, SlotKind::Number, SlotKind::Distance, SlotKind::Angle]
    };
    let mut parts: Vec<String> = Vec::new();
    let mut last_slot = true;
    let mut slots = 0;
    for _ in 0..rng.gen_range(1..7) {
        if !last_slot && slots < 3 && rng.gen_bool(0.35) {
            let kind = kinds.choose(rng).unwrap();
            parts.push(format!("{{S{slots}:{kind}}}"));
            slots += 1;
            last_slot = true;
        } else {
            parts.push(word(rng).to_string());
            last_slot = false;
        }
    }
    let mut raw = parts.join(" ");
    if rng.gen_bool(0.3) && !last_slot {
        raw.push(*['.', '?', '!'].choose(rng).unwrap());
    }
    raw
}

/// A random single-tab inventory over the shared vocabulary.
pub fn random_inventory(rng: &mut impl Rng, n: usize) -> Value {
    let mut buttons = Vec::new();
    let mut seen = HashSet::new();
    while buttons.len() < n {
        let text = if rng.gen_bool(0.3) {
            random_template(rng, false)
        } else {
            (0..rng.gen_range(1..5)).map(|_| word(rng)).collect::<Vec<_>>().join(" ")
        };
        if !seen.insert(text.clone()) {
            continue;
        }
        buttons.push(button_json(&format!("b{}", buttons.len()), &text));
    }
    inventory_json(buttons)
}

pub fn button_json(id: &str, text: &str) -> Value {
    let label: String = text.chars().take(40).collect();
    json!({"id": id, "label": label, "text": text, "recipient": "PARTICIPANT", "function": "DESCRIPTION"})
}

pub fn inventory_json(buttons: Vec<Value>) -> Value {
    let ids: Vec<Value> = buttons.iter().map(|b| b["id"].clone()).collect();
    json!({"buttons": buttons, "tabs": [{"id": "t", "title": "T", "rows": [{"label": "r", "buttons": ids}]}]})
}

/// A random environment document with unique, distinct-after-normalization ids.
pub fn random_environment(rng: &mut impl Rng) -> Value {
    let mut counter = 0;
    let mut id = |prefix: &str| {
        counter += 1;
        format!("{prefix} {counter}")
    };
    let spaces: Vec<(String, &str)> = (0..rng.gen_range(0..10))
        .map(|_| {
            let kind = if rng.gen_bool(0.5) { "ROOM" } else { "HALLWAY" };
            (id(if kind == "ROOM" { "Room" } else { "Hall" }), kind)
        })
        .collect();
    let mut doorways = Vec::new();
    let mut objects = Vec::new();
    if !spaces.is_empty() {
        for _ in 0..rng.gen_range(0..15) {
            let space = &spaces.choose(rng).unwrap().0;
            doorways.push(json!({"id": id("Door"), "space": space}));
        }
        for _ in 0..rng.gen_range(0..25) {
            let space = &spaces.choose(rng).unwrap().0;
            objects.push(json!({"id": id("Object"), "space": space}));
        }
    }
    let mut areas: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let area_count = rng.gen_range(1..4);
    for (s, _) in &spaces {
        areas.entry(rng.gen_range(0..area_count)).or_default().push(s.clone());
    }
    json!({
        "spaces": spaces.iter().map(|(i, k)| json!({"id": i, "kind": k})).collect::<Vec<_>>(),
        "doorways": doorways,
        "objects": objects,
        "areas": areas.into_values().collect::<Vec<_>>(),
    })
}

/// True if `t` has no slots.
pub fn is_literal(t: &MessageTemplate) -> bool {
    t.segments().iter().all(|s| matches!(s, Segment::Literal(_)))
}
