//! Uniquely named spaces, doorways and objects, and the single-action
//! navigation buttons generated for each of them.
//!
//! Every generated instruction goes to the robot-navigator wizard and is paired
//! with two participant feedback buttons ("I will …" / "I …ed …").

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inventory::{
    ButtonEntry, InventoryDocument, MessageFunction, Placement, Recipient, ResponseButton, RowEntry,
    Semantics, TabEntry, MAX_LABEL_CHARS,
};
use crate::template::{normalize, EntityResolver, MessageTemplate, TERMINAL_PUNCTUATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityKind {
    Room,
    Hallway,
    Doorway,
    Object,
}

impl EntityKind {
    pub fn is_space(self) -> bool {
        matches!(self, EntityKind::Room | EntityKind::Hallway)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnvironmentEntity {
    pub id: String,
    pub kind: EntityKind,
    /// Containing room or hallway; `None` for spaces themselves.
    pub space_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvironmentError {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

// --- document schema -------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentDocument {
    pub spaces: Vec<SpaceEntry>,
    #[serde(default)]
    pub doorways: Vec<PlacedEntry>,
    #[serde(default)]
    pub objects: Vec<PlacedEntry>,
    pub areas: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceEntry {
    pub id: String,
    pub kind: EntityKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacedEntry {
    pub id: String,
    pub space: String,
}

// --- map -------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentMap {
    entities: IndexMap<String, EnvironmentEntity>,
    areas: Vec<Vec<String>>,
    by_normalized: HashMap<String, String>,
}

impl EnvironmentMap {
    pub fn from_json(text: &str) -> Result<Self, EnvironmentError> {
        let doc: EnvironmentDocument =
            serde_json::from_str(text).map_err(|e| EnvironmentError::InvalidMap(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn load_path(path: impl AsRef<Path>) -> Result<Self, EnvironmentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| EnvironmentError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    pub fn from_document(doc: EnvironmentDocument) -> Result<Self, EnvironmentError> {
        let invalid = |msg: String| Err(EnvironmentError::InvalidMap(msg));
        let mut entities = IndexMap::new();
        let mut by_normalized = HashMap::new();

        let spaces = doc.spaces.into_iter().map(|s| (s.id, s.kind, None));
        let doorways = doc.doorways.into_iter().map(|d| (d.id, EntityKind::Doorway, Some(d.space)));
        let objects = doc.objects.into_iter().map(|o| (o.id, EntityKind::Object, Some(o.space)));

        for (id, kind, space_id) in spaces.chain(doorways).chain(objects) {
            check_id(&id)?;
            if space_id.is_none() && !kind.is_space() {
                return invalid(format!("{id:?} listed as a space but has kind {kind:?}"));
            }
            if let Some(previous) = by_normalized.insert(normalize(&id), id.clone()) {
                return invalid(format!("entity id {id:?} collides with {previous:?}"));
            }
            entities.insert(id.clone(), EnvironmentEntity { id, kind, space_id });
        }

        for entity in entities.values() {
            if let Some(space) = &entity.space_id {
                match entities.get(space) {
                    Some(s) if s.kind.is_space() => {}
                    Some(_) => return invalid(format!("{:?} is placed in non-space {space:?}", entity.id)),
                    None => return invalid(format!("{:?} references unknown space {space:?}", entity.id)),
                }
            }
        }

        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (a, area) in doc.areas.iter().enumerate() {
            for id in area {
                match entities.get(id) {
                    Some(e) if e.kind.is_space() => {}
                    _ => return invalid(format!("area {a} lists {id:?}, which is not a space")),
                }
                if seen.insert(id, a).is_some() {
                    return invalid(format!("space {id:?} appears in more than one area"));
                }
            }
        }
        if let Some(missing) =
            entities.values().find(|e| e.kind.is_space() && !seen.contains_key(e.id.as_str()))
        {
            return invalid(format!("space {:?} is not in any area", missing.id));
        }

        Ok(EnvironmentMap { entities, areas: doc.areas, by_normalized })
    }

    pub fn resolve(&self, id: &str) -> Result<&EnvironmentEntity, EnvironmentError> {
        self.entities.get(id).ok_or_else(|| EnvironmentError::UnknownEntity(id.to_string()))
    }

    pub fn entities(&self) -> impl Iterator<Item = &EnvironmentEntity> {
        self.entities.values()
    }

    pub fn areas(&self) -> &[Vec<String>] {
        &self.areas
    }

    pub fn count(&self, kind: EntityKind) -> usize {
        self.entities.values().filter(|e| e.kind == kind).count()
    }

    /// The space an entity belongs to (itself, for rooms and hallways).
    fn home_space<'a>(&'a self, entity: &'a EnvironmentEntity) -> &'a str {
        entity.space_id.as_deref().unwrap_or(&entity.id)
    }

    /// Generates the navigation buttons for every entity, ordered by area,
    /// then entity id, then action.
    pub fn generate_entity_buttons(&self) -> Vec<ResponseButton> {
        let area_of: HashMap<&str, usize> = self
            .areas
            .iter()
            .enumerate()
            .flat_map(|(a, spaces)| spaces.iter().map(move |s| (s.as_str(), a)))
            .collect();

        let mut ordered: Vec<(usize, &EnvironmentEntity)> =
            self.entities.values().map(|e| (area_of[self.home_space(e)], e)).collect();
        ordered.sort_by(|(a1, e1), (a2, e2)| a1.cmp(a2).then_with(|| e1.id.cmp(&e2.id)));

        let mut buttons = Vec::new();
        for (area, entity) in ordered {
            let placement =
                Placement { tab_id: area_tab_id(area), row_label: self.home_space(entity).to_string() };
            for action in NavAction::for_kind(entity.kind) {
                buttons.extend(action.buttons(&entity.id, &placement));
            }
        }
        buttons
    }

    /// The generated buttons as a merge-ready inventory fragment: one tab per
    /// area, one row per space.
    pub fn inventory_fragment(&self) -> InventoryDocument {
        let buttons = self.generate_entity_buttons();
        let mut tabs: Vec<TabEntry> = (0..self.areas.len())
            .map(|a| TabEntry { id: area_tab_id(a), title: format!("Area {}", a + 1), rows: Vec::new() })
            .collect();
        for button in &buttons {
            let placement = &button.placements[0];
            let tab = tabs
                .iter_mut()
                .find(|t| t.id == placement.tab_id)
                .expect("generated placement names an area tab");
            match tab.rows.iter_mut().find(|r| r.label == placement.row_label) {
                Some(row) => row.buttons.push(button.id.clone()),
                None => tab
                    .rows
                    .push(RowEntry { label: placement.row_label.clone(), buttons: vec![button.id.clone()] }),
            }
        }
        tabs.retain(|t| !t.rows.is_empty());
        InventoryDocument { buttons: buttons.into_iter().map(button_entry).collect(), tabs }
    }
}

impl EntityResolver for EnvironmentMap {
    fn contains(&self, id: &str) -> bool {
        self.entities.contains_key(id)
    }

    fn canonical(&self, normalized: &str) -> Option<&str> {
        self.by_normalized.get(normalized).map(String::as_str)
    }
}

fn check_id(id: &str) -> Result<(), EnvironmentError> {
    let bad =
        id.is_empty() || id.trim() != id || id.contains(['{', '}']) || id.ends_with(TERMINAL_PUNCTUATION);
    if bad {
        return Err(EnvironmentError::InvalidMap(format!(
            "entity id {id:?} must be non-empty, trimmed, brace-free and not end in punctuation"
        )));
    }
    Ok(())
}

fn area_tab_id(area: usize) -> String {
    format!("area-{}", area + 1)
}

/// Number of buttons [`EnvironmentMap::generate_entity_buttons`] produces.
pub fn expected_button_count(spaces: usize, doorways: usize, objects: usize) -> usize {
    3 * spaces + 12 * doorways + 3 * objects
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NavAction {
    MoveTo,
    MoveParallel,
    MoveThrough,
    TurnToFace,
    MoveInto,
}

impl NavAction {
    fn for_kind(kind: EntityKind) -> &'static [NavAction] {
        match kind {
            EntityKind::Room | EntityKind::Hallway => &[NavAction::MoveInto],
            EntityKind::Doorway => {
                &[NavAction::MoveTo, NavAction::MoveParallel, NavAction::MoveThrough, NavAction::TurnToFace]
            }
            EntityKind::Object => &[NavAction::MoveTo],
        }
    }

    fn slug(self) -> &'static str {
        match self {
            NavAction::MoveTo => "move-to",
            NavAction::MoveParallel => "move-parallel",
            NavAction::MoveThrough => "move-through",
            NavAction::TurnToFace => "turn-to-face",
            NavAction::MoveInto => "move-into",
        }
    }

    /// (imperative, past tense) phrasing.
    fn phrases(self) -> (&'static str, &'static str) {
        match self {
            NavAction::MoveTo => ("move to", "moved to"),
            NavAction::MoveParallel => ("move parallel to", "moved parallel to"),
            NavAction::MoveThrough => ("move through", "moved through"),
            NavAction::TurnToFace => ("turn to face", "turned to face"),
            NavAction::MoveInto => ("move into", "moved into"),
        }
    }

    fn semantics(self, target: &str) -> Semantics {
        let mut s = BTreeMap::new();
        s.insert("action".to_string(), self.slug().replace('-', "_"));
        s.insert("target".to_string(), target.to_string());
        if self == NavAction::MoveTo {
            // vicinity only; facing is a separate action
            s.insert("stop".to_string(), "within_one_robot_length".to_string());
            s.insert("reorient".to_string(), "false".to_string());
        }
        s
    }

    fn buttons(self, target: &str, placement: &Placement) -> [ResponseButton; 3] {
        let (imperative, past) = self.phrases();
        let id = format!("{}@{}", self.slug(), target);
        let will_id = format!("{id}/will");
        let did_id = format!("{id}/did");
        let button = |id: String, text: String, recipient, function, semantics, paired| {
            let template = MessageTemplate::parse(&text).expect("entity ids are template-safe");
            ResponseButton {
                id,
                label: short_label(&text),
                template,
                recipient,
                function,
                paired_feedback_ids: paired,
                semantics,
                placements: vec![placement.clone()],
            }
        };
        [
            button(
                id,
                format!("{imperative} {target}"),
                Recipient::RnWizard,
                MessageFunction::Instruction,
                Some(self.semantics(target)),
                vec![will_id.clone(), did_id.clone()],
            ),
            button(
                will_id,
                format!("I will {imperative} {target}"),
                Recipient::Participant,
                MessageFunction::FeedbackWillDo,
                None,
                Vec::new(),
            ),
            button(
                did_id,
                format!("I {past} {target}"),
                Recipient::Participant,
                MessageFunction::FeedbackDone,
                None,
                Vec::new(),
            ),
        ]
    }
}

fn short_label(text: &str) -> String {
    if text.chars().count() <= MAX_LABEL_CHARS {
        return text.to_string();
    }
    let mut label: String = text.chars().take(MAX_LABEL_CHARS - 1).collect();
    label.push('…');
    label
}

fn button_entry(button: ResponseButton) -> ButtonEntry {
    ButtonEntry {
        id: button.id,
        label: button.label,
        text: button.template.raw().to_string(),
        recipient: button.recipient,
        function: button.function,
        paired_feedback: button.paired_feedback_ids,
        semantics: button.semantics,
    }
}
