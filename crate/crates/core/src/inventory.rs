//! The button inventory: every message the dialogue-manager wizard can send,
//! organized into tabs of labeled rows.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::template::{normalize, EntityResolver, MessageTemplate, TemplateError};

/// Longest label that fits a grid cell.
pub const MAX_LABEL_CHARS: usize = 48;

/// Normalized texts allowed on COMPLETION buttons.
pub const COMPLETION_TEXTS: [&str; 2] = ["done", "sent"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Recipient {
    Participant,
    RnWizard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorClass {
    Blue,
    Red,
}

impl Recipient {
    pub fn color_class(self) -> ColorClass {
        match self {
            Recipient::Participant => ColorClass::Blue,
            Recipient::RnWizard => ColorClass::Red,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageFunction {
    Instruction,
    Ack,
    FeedbackWillDo,
    FeedbackDone,
    Completion,
    Deliberation,
    Clarification,
    Capability,
    Nonunderstanding,
    Description,
}

impl MessageFunction {
    pub const ALL: [MessageFunction; 10] = [
        MessageFunction::Instruction,
        MessageFunction::Ack,
        MessageFunction::FeedbackWillDo,
        MessageFunction::FeedbackDone,
        MessageFunction::Completion,
        MessageFunction::Deliberation,
        MessageFunction::Clarification,
        MessageFunction::Capability,
        MessageFunction::Nonunderstanding,
        MessageFunction::Description,
    ];
}

/// Machine-readable hints attached to a button, e.g. the action a generated
/// navigation instruction stands for.
pub type Semantics = BTreeMap<String, String>;

// --- document schema -------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventoryDocument {
    pub buttons: Vec<ButtonEntry>,
    pub tabs: Vec<TabEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ButtonEntry {
    pub id: String,
    pub label: String,
    pub text: String,
    pub recipient: Recipient,
    pub function: MessageFunction,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paired_feedback: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantics: Option<Semantics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabEntry {
    pub id: String,
    pub title: String,
    pub rows: Vec<RowEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowEntry {
    pub label: String,
    pub buttons: Vec<String>,
}

impl InventoryDocument {
    pub fn from_json(text: &str) -> Result<Self, InventoryError> {
        serde_json::from_str(text).map_err(|e| InventoryError::Schema {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("inventory document serializes")
    }

    /// Appends another document's buttons and tabs.
    pub fn merge(&mut self, other: InventoryDocument) {
        self.buttons.extend(other.buttons);
        self.tabs.extend(other.tabs);
    }
}

// --- errors ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InventoryError {
    #[error("{location}: {message}")]
    Schema { location: String, message: String },
    #[error("{location}: duplicate id {id:?}")]
    DuplicateId { location: String, id: String },
    #[error("{location}: reference to unknown id {target:?}")]
    DanglingReference { location: String, target: String },
    #[error("{location}: paired feedback {target:?} is not a participant button")]
    InvalidPairing { location: String, target: String },
    #[error("{location}: button {id:?} is not placed in any tab")]
    OrphanButton { location: String, id: String },
    #[error("{location}: {source}")]
    MalformedSlotMarker {
        location: String,
        #[source]
        source: TemplateError,
    },
    #[error("unknown button {0:?}")]
    UnknownButton(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

impl InventoryError {
    pub fn code(&self) -> &'static str {
        match self {
            InventoryError::Schema { .. } => "schema",
            InventoryError::DuplicateId { .. } => "duplicate-id",
            InventoryError::DanglingReference { .. } => "dangling-reference",
            InventoryError::InvalidPairing { .. } => "invalid-pairing",
            InventoryError::OrphanButton { .. } => "orphan-button",
            InventoryError::MalformedSlotMarker { .. } => "malformed-slot-marker",
            InventoryError::UnknownButton(_) => "unknown-button",
            InventoryError::Io { .. } => "io",
        }
    }

    pub fn location(&self) -> &str {
        match self {
            InventoryError::Schema { location, .. }
            | InventoryError::DuplicateId { location, .. }
            | InventoryError::DanglingReference { location, .. }
            | InventoryError::InvalidPairing { location, .. }
            | InventoryError::OrphanButton { location, .. }
            | InventoryError::MalformedSlotMarker { location, .. } => location,
            InventoryError::UnknownButton(_) => "",
            InventoryError::Io { path, .. } => path,
        }
    }
}

// --- registry --------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Placement {
    pub tab_id: String,
    pub row_label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseButton {
    pub id: String,
    pub label: String,
    pub template: MessageTemplate,
    pub recipient: Recipient,
    pub function: MessageFunction,
    pub paired_feedback_ids: Vec<String>,
    pub semantics: Option<Semantics>,
    /// Every (tab, row) the button appears in, in tab order.
    pub placements: Vec<Placement>,
}

impl ResponseButton {
    pub fn color_class(&self) -> ColorClass {
        self.recipient.color_class()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub label: String,
    pub button_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tab {
    pub id: String,
    pub title: String,
    pub rows: Vec<Row>,
}

/// A validated, immutable inventory.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    buttons: IndexMap<String, ResponseButton>,
    tabs: Vec<Tab>,
    source_hash: String,
    source: String,
}

impl Registry {
    /// Parses and validates an inventory document.
    pub fn load(text: &str) -> Result<Self, InventoryError> {
        Self::load_with(text, None)
    }

    /// Like [`load`](Self::load), additionally checking entity references
    /// in button semantics against `entities`.
    pub fn load_with(text: &str, entities: Option<&dyn EntityResolver>) -> Result<Self, InventoryError> {
        let doc = InventoryDocument::from_json(text)?;
        Self::build(doc, text.to_string(), entities)
    }

    pub fn load_path(
        path: impl AsRef<Path>,
        entities: Option<&dyn EntityResolver>,
    ) -> Result<Self, InventoryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| InventoryError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::load_with(&text, entities)
    }

    pub fn from_document(doc: InventoryDocument) -> Result<Self, InventoryError> {
        let source = serde_json::to_string(&doc).expect("inventory document serializes");
        Self::build(doc, source, None)
    }

    fn build(
        doc: InventoryDocument,
        source: String,
        entities: Option<&dyn EntityResolver>,
    ) -> Result<Self, InventoryError> {
        let templates = match check_document(&doc, entities) {
            Checked::Valid(templates) => templates,
            Checked::Invalid(mut errors) => return Err(errors.swap_remove(0)),
        };

        let mut buttons: IndexMap<String, ResponseButton> = doc
            .buttons
            .into_iter()
            .zip(templates)
            .map(|(entry, template)| {
                let button = ResponseButton {
                    id: entry.id.clone(),
                    label: entry.label,
                    template,
                    recipient: entry.recipient,
                    function: entry.function,
                    paired_feedback_ids: entry.paired_feedback,
                    semantics: entry.semantics,
                    placements: Vec::new(),
                };
                (entry.id, button)
            })
            .collect();

        let tabs: Vec<Tab> = doc
            .tabs
            .into_iter()
            .map(|tab| Tab {
                rows: tab
                    .rows
                    .into_iter()
                    .map(|row| {
                        for id in &row.buttons {
                            if let Some(button) = buttons.get_mut(id) {
                                button
                                    .placements
                                    .push(Placement { tab_id: tab.id.clone(), row_label: row.label.clone() });
                            }
                        }
                        Row { label: row.label, button_ids: row.buttons }
                    })
                    .collect(),
                id: tab.id,
                title: tab.title,
            })
            .collect();

        let source_hash = hex::encode(Sha256::digest(source.as_bytes()));
        Ok(Registry { buttons, tabs, source_hash, source })
    }

    pub fn lookup(&self, id: &str) -> Result<&ResponseButton, InventoryError> {
        self.buttons.get(id).ok_or_else(|| InventoryError::UnknownButton(id.to_string()))
    }

    /// Full message text as shown on hover, with slots shown by name.
    pub fn hover_text(&self, id: &str) -> Result<String, InventoryError> {
        Ok(self.lookup(id)?.template.display_text())
    }

    pub fn buttons_by_function(&self, function: MessageFunction) -> Vec<&ResponseButton> {
        self.buttons.values().filter(|b| b.function == function).collect()
    }

    pub fn buttons(&self) -> impl Iterator<Item = &ResponseButton> {
        self.buttons.values()
    }

    pub fn button_count(&self) -> usize {
        self.buttons.len()
    }

    pub fn placement_count(&self) -> usize {
        self.buttons.values().map(|b| b.placements.len()).sum()
    }

    pub fn tabs(&self) -> &[Tab] {
        &self.tabs
    }

    pub fn tab_count(&self) -> usize {
        self.tabs.len()
    }

    /// SHA-256 of the loaded document text, hex-encoded.
    pub fn source_hash(&self) -> &str {
        &self.source_hash
    }

    /// The document text this registry was loaded from.
    pub fn source(&self) -> &str {
        &self.source
    }
}

impl fmt::Display for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} buttons, {} placements, {} tabs",
            self.button_count(),
            self.placement_count(),
            self.tab_count()
        )
    }
}

/// Parses and validates the whole document, reporting every violation.
pub fn check_inventory(text: &str, entities: Option<&dyn EntityResolver>) -> Vec<InventoryError> {
    match InventoryDocument::from_json(text) {
        Ok(doc) => match check_document(&doc, entities) {
            Checked::Valid(_) => Vec::new(),
            Checked::Invalid(errors) => errors,
        },
        Err(e) => vec![e],
    }
}

enum Checked {
    Valid(Vec<MessageTemplate>),
    Invalid(Vec<InventoryError>),
}

fn check_document(doc: &InventoryDocument, entities: Option<&dyn EntityResolver>) -> Checked {
    let mut errors = Vec::new();
    let schema =
        |location: String, message: &str| InventoryError::Schema { location, message: message.to_string() };

    if doc.tabs.is_empty() {
        errors.push(schema("tabs".into(), "inventory has no tabs"));
    }

    let mut recipients: IndexMap<&str, Recipient> = IndexMap::new();
    let mut templates = Vec::with_capacity(doc.buttons.len());
    for (i, button) in doc.buttons.iter().enumerate() {
        let location = format!("buttons[{i}] ({:?})", button.id);
        if button.id.trim().is_empty() {
            errors.push(schema(location.clone(), "button id is empty"));
        }
        if recipients.insert(&button.id, button.recipient).is_some() {
            errors.push(InventoryError::DuplicateId { location: location.clone(), id: button.id.clone() });
        }
        let label_chars = button.label.chars().count();
        if label_chars == 0 || label_chars > MAX_LABEL_CHARS {
            errors.push(schema(
                location.clone(),
                &format!("label must be 1..={MAX_LABEL_CHARS} characters, got {label_chars}"),
            ));
        }
        match MessageTemplate::parse(&button.text) {
            Ok(template) => {
                if button.function == MessageFunction::Completion
                    && !(template.is_literal()
                        && COMPLETION_TEXTS.contains(&normalize(&button.text).as_str()))
                {
                    errors
                        .push(schema(location.clone(), "COMPLETION buttons must read \"done\" or \"sent\""));
                }
                templates.push(template);
            }
            Err(source) => {
                errors.push(InventoryError::MalformedSlotMarker { location: location.clone(), source })
            }
        }
        if let (Some(resolver), Some(target)) =
            (entities, button.semantics.as_ref().and_then(|s| s.get("target")))
        {
            if !resolver.contains(target) {
                errors.push(InventoryError::DanglingReference {
                    location: format!("{location}.semantics.target"),
                    target: target.clone(),
                });
            }
        }
    }

    for (i, button) in doc.buttons.iter().enumerate() {
        for target in &button.paired_feedback {
            let location = format!("buttons[{i}] ({:?}).paired_feedback", button.id);
            match recipients.get(target.as_str()) {
                None => errors.push(InventoryError::DanglingReference { location, target: target.clone() }),
                Some(Recipient::RnWizard) => {
                    errors.push(InventoryError::InvalidPairing { location, target: target.clone() })
                }
                Some(Recipient::Participant) => {}
            }
        }
    }

    let mut tab_ids = HashSet::new();
    let mut placed = HashSet::new();
    for (t, tab) in doc.tabs.iter().enumerate() {
        let location = format!("tabs[{t}] ({:?})", tab.id);
        if !tab_ids.insert(tab.id.as_str()) {
            errors.push(InventoryError::DuplicateId { location: location.clone(), id: tab.id.clone() });
        }
        for (r, row) in tab.rows.iter().enumerate() {
            for id in &row.buttons {
                if recipients.contains_key(id.as_str()) {
                    placed.insert(id.as_str());
                } else {
                    errors.push(InventoryError::DanglingReference {
                        location: format!("{location}.rows[{r}] ({:?})", row.label),
                        target: id.clone(),
                    });
                }
            }
        }
    }

    for (i, button) in doc.buttons.iter().enumerate() {
        if !placed.contains(button.id.as_str()) {
            errors.push(InventoryError::OrphanButton {
                location: format!("buttons[{i}]"),
                id: button.id.clone(),
            });
        }
    }

    if errors.is_empty() {
        Checked::Valid(templates)
    } else {
        Checked::Invalid(errors)
    }
}
