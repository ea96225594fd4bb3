//! Message templates with typed text-input slots.
//!
//! A template is literal text with zero or more slot markers of the form
//! `{NAME:KIND}`, e.g. `I see {OBJ:FREE_TEXT}.`. Templates can be filled
//! with a [`SlotBinding`] to produce a concrete message, and inverse-matched
//! against an utterance to recover the binding that produced it.
//!
//! ```
//! use woz::{MessageTemplate, SlotBinding};
//!
//! let t = MessageTemplate::parse("turn {DIR:FREE_TEXT} {A:ANGLE}").unwrap();
//! let b: SlotBinding = [("DIR", "left"), ("A", "90 degrees")].into_iter().collect();
//! assert_eq!(t.fill(&b, None).unwrap(), "turn left 90 degrees");
//! assert_eq!(t.match_utterance("Turn left 90 degrees.", None), Some(b));
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Characters stripped from the end of a message by [`normalize`].
pub const TERMINAL_PUNCTUATION: [char; 3] = ['.', '!', '?'];

/// Stands in for a slot while normalizing literal context. Rejected in literals.
/// Byte range of one slot fill inside a normalized utterance.
type Span = (usize, usize);

const PLACEHOLDER: char = '\u{E000}';

const DISTANCE_UNITS: &[&str] = &[
    "feet",
    "foot",
    "ft",
    "inches",
    "inch",
    "in",
    "yards",
    "yard",
    "meters",
    "meter",
    "metres",
    "metre",
    "m",
    "centimeters",
    "cm",
];
const ANGLE_UNITS: &[&str] = &["degrees", "degree", "deg"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template text is empty")]
    Empty,
    #[error("malformed slot marker at byte {offset}: {problem}")]
    MalformedSlotMarker { offset: usize, problem: MarkerProblem },
    #[error("no binding for slot {0}")]
    MissingBinding(String),
    #[error("binding names unknown slot {0}")]
    UnknownSlot(String),
    #[error("slot {slot} rejects {value:?}: {reason}")]
    ConstraintViolation { slot: String, value: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MarkerProblem {
    Unbalanced,
    InvalidName(String),
    UnknownKind(String),
    DuplicateName(String),
    /// Two slots with no literal text between them.
    AdjacentSlots,
    /// The literal text carries no word characters at all.
    NoLiteralContext,
    ReservedCharacter,
}

impl fmt::Display for MarkerProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarkerProblem::Unbalanced => f.write_str("unbalanced braces"),
            MarkerProblem::InvalidName(n) => write!(f, "invalid slot name {n:?}"),
            MarkerProblem::UnknownKind(k) => write!(f, "unknown slot kind {k:?}"),
            MarkerProblem::DuplicateName(n) => write!(f, "duplicate slot name {n}"),
            MarkerProblem::AdjacentSlots => f.write_str("slots must be separated by literal text"),
            MarkerProblem::NoLiteralContext => f.write_str("template has no literal words around its slots"),
            MarkerProblem::ReservedCharacter => f.write_str("reserved character in literal text"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SlotKind {
    FreeText,
    Number,
    Distance,
    Angle,
    EntityId,
}

impl SlotKind {
    pub const ALL: [SlotKind; 5] =
        [SlotKind::FreeText, SlotKind::Number, SlotKind::Distance, SlotKind::Angle, SlotKind::EntityId];

    pub fn as_str(self) -> &'static str {
        match self {
            SlotKind::FreeText => "FREE_TEXT",
            SlotKind::Number => "NUMBER",
            SlotKind::Distance => "DISTANCE",
            SlotKind::Angle => "ANGLE",
            SlotKind::EntityId => "ENTITY_ID",
        }
    }

    fn default_units(self) -> &'static [&'static str] {
        match self {
            SlotKind::Distance => DISTANCE_UNITS,
            SlotKind::Angle => ANGLE_UNITS,
            _ => &[],
        }
    }
}

impl fmt::Display for SlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SlotKind {
    type Err = MarkerProblem;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SlotKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| MarkerProblem::UnknownKind(s.to_string()))
    }
}

/// Looks up environment entity ids for `ENTITY_ID` slots.
pub trait EntityResolver {
    /// Exact, case-sensitive lookup.
    fn contains(&self, id: &str) -> bool;

    /// Canonical id for an id given in normalized (lowercased) form.
    fn canonical(&self, normalized: &str) -> Option<&str>;
}

/// A typed slot inside a template.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSpec {
    pub name: String,
    pub kind: SlotKind,
    /// Allowed numeric range for NUMBER, DISTANCE and ANGLE fills.
    pub range: Option<RangeInclusive<f64>>,
    /// Overrides the default unit set for DISTANCE and ANGLE fills.
    pub units: Option<Vec<String>>,
}

impl SlotSpec {
    pub fn new(name: impl Into<String>, kind: SlotKind) -> Self {
        SlotSpec { name: name.into(), kind, range: None, units: None }
    }

    pub fn with_range(mut self, range: RangeInclusive<f64>) -> Self {
        self.range = Some(range);
        self
    }

    pub fn with_units<I, S>(mut self, units: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.units = Some(units.into_iter().map(Into::into).collect());
        self
    }

    /// Checks a (trimmed) fill. Returns the fill as it should be substituted,
    /// which for entity ids may be the canonical spelling.
    pub fn validate(&self, value: &str, resolver: Option<&dyn EntityResolver>) -> Result<(), TemplateError> {
        let violation = |reason: &str| TemplateError::ConstraintViolation {
            slot: self.name.clone(),
            value: value.to_string(),
            reason: reason.to_string(),
        };
        if value.is_empty() {
            return Err(violation("fill must be non-empty"));
        }
        if value.contains(['{', '}', PLACEHOLDER]) {
            return Err(violation("fill may not contain slot markers"));
        }
        match self.kind {
            SlotKind::FreeText => {
                if value.ends_with(TERMINAL_PUNCTUATION) {
                    return Err(violation("fill may not end with terminal punctuation"));
                }
            }
            SlotKind::EntityId => match resolver {
                Some(r) if !r.contains(value) => return Err(violation("unknown entity id")),
                Some(_) => {}
                None if value.ends_with(TERMINAL_PUNCTUATION) => {
                    return Err(violation("fill may not end with terminal punctuation"))
                }
                None => {}
            },
            SlotKind::Number => {
                let n = parse_decimal(value).ok_or_else(|| violation("not a decimal number"))?;
                self.check_range(n).map_err(|_| violation("number out of range"))?;
            }
            SlotKind::Distance | SlotKind::Angle => {
                let (number, unit) =
                    split_measure(value).ok_or_else(|| violation("expected a number followed by a unit"))?;
                let n = parse_decimal(number).ok_or_else(|| violation("not a decimal number"))?;
                if !self.accepts_unit(unit) {
                    return Err(violation("unit not allowed"));
                }
                self.check_range(n).map_err(|_| violation("number out of range"))?;
            }
        }
        Ok(())
    }

    fn check_range(&self, n: f64) -> Result<(), ()> {
        match &self.range {
            Some(r) if !r.contains(&n) => Err(()),
            _ => Ok(()),
        }
    }

    fn accepts_unit(&self, unit: &str) -> bool {
        match &self.units {
            Some(units) => units.iter().any(|u| u.eq_ignore_ascii_case(unit)),
            None => self.kind.default_units().iter().any(|u| u.eq_ignore_ascii_case(unit)),
        }
    }
}

/// Non-negative decimal: digits with an optional fractional part.
fn parse_decimal(s: &str) -> Option<f64> {
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (s, None),
    };
    let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    if !digits(int) || frac.is_some_and(|f| !digits(f)) {
        return None;
    }
    s.parse().ok()
}

fn split_measure(value: &str) -> Option<(&str, &str)> {
    let split = value.find(|c: char| !(c.is_ascii_digit() || c == '.'))?;
    let (number, rest) = value.split_at(split);
    let unit = rest.trim_start();
    if number.is_empty() || unit.is_empty() || unit.contains(char::is_whitespace) {
        return None;
    }
    Some((number, unit))
}

/// Fills for a template's slots, keyed by slot name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlotBinding(BTreeMap<String, String>);

impl SlotBinding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.insert(name, value);
        self
    }

    pub fn insert(&mut self, name: impl Into<String>, value: impl Into<String>) {
        self.0.insert(name.into(), value.into());
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for SlotBinding {
    fn from_iter<T: IntoIterator<Item = (K, V)>>(iter: T) -> Self {
        SlotBinding(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Segment {
    Literal(String),
    /// Index into [`MessageTemplate::slots`].
    Slot(usize),
}

/// A parsed message template.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageTemplate {
    raw: String,
    segments: Vec<Segment>,
    slots: Vec<SlotSpec>,
    /// Normalized literal context around each slot: `slots.len() + 1` pieces.
    pattern: Vec<String>,
}

impl MessageTemplate {
    /// Parses `raw`, which uses `{NAME:KIND}` slot markers.
    pub fn parse(raw: &str) -> Result<Self, TemplateError> {
        if raw.trim().is_empty() {
            return Err(TemplateError::Empty);
        }
        let malformed = |offset, problem| TemplateError::MalformedSlotMarker { offset, problem };

        let mut segments = Vec::new();
        let mut slots: Vec<SlotSpec> = Vec::new();
        let mut literal_start = 0;
        let mut cursor = 0;
        while let Some(rel) = raw[cursor..].find(['{', '}']) {
            let open = cursor + rel;
            if raw.as_bytes()[open] == b'}' {
                return Err(malformed(open, MarkerProblem::Unbalanced));
            }
            let close = match raw[open + 1..].find(['{', '}']) {
                Some(r) if raw.as_bytes()[open + 1 + r] == b'}' => open + 1 + r,
                _ => return Err(malformed(open, MarkerProblem::Unbalanced)),
            };
            let literal = &raw[literal_start..open];
            if literal.is_empty() && matches!(segments.last(), Some(Segment::Slot(_))) {
                return Err(malformed(open, MarkerProblem::AdjacentSlots));
            }
            if !literal.is_empty() {
                segments.push(Segment::Literal(literal.to_string()));
            }
            let spec = parse_marker(&raw[open + 1..close]).map_err(|p| malformed(open, p))?;
            if slots.iter().any(|s| s.name == spec.name) {
                return Err(malformed(open, MarkerProblem::DuplicateName(spec.name)));
            }
            segments.push(Segment::Slot(slots.len()));
            slots.push(spec);
            cursor = close + 1;
            literal_start = cursor;
        }
        if literal_start < raw.len() {
            segments.push(Segment::Literal(raw[literal_start..].to_string()));
        }

        if let Some(offset) = raw.find(PLACEHOLDER) {
            return Err(malformed(offset, MarkerProblem::ReservedCharacter));
        }
        let has_words = segments.iter().any(|s| match s {
            Segment::Literal(text) => text.chars().any(char::is_alphanumeric),
            Segment::Slot(_) => false,
        });
        if !slots.is_empty() && !has_words {
            return Err(malformed(0, MarkerProblem::NoLiteralContext));
        }

        let mut skeleton = String::with_capacity(raw.len());
        for segment in &segments {
            match segment {
                Segment::Literal(text) => skeleton.push_str(text),
                Segment::Slot(_) => skeleton.push(PLACEHOLDER),
            }
        }
        let pattern: Vec<String> = normalize(&skeleton).split(PLACEHOLDER).map(str::to_string).collect();
        debug_assert_eq!(pattern.len(), slots.len() + 1);

        Ok(MessageTemplate { raw: raw.to_string(), segments, slots, pattern })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn slots(&self) -> &[SlotSpec] {
        &self.slots
    }

    pub fn slot(&self, name: &str) -> Option<&SlotSpec> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn slot_mut(&mut self, name: &str) -> Option<&mut SlotSpec> {
        self.slots.iter_mut().find(|s| s.name == name)
    }

    pub fn is_literal(&self) -> bool {
        self.slots.is_empty()
    }

    /// Re-renders the canonical marker form. Equal to [`raw`](Self::raw).
    pub fn render(&self) -> String {
        self.render_with(|spec| format!("{{{}:{}}}", spec.name, spec.kind))
    }

    /// Operator-facing form with each slot shown as its all-caps name.
    pub fn display_text(&self) -> String {
        self.render_with(|spec| spec.name.clone())
    }

    fn render_with(&self, slot: impl Fn(&SlotSpec) -> String) -> String {
        self.segments
            .iter()
            .map(|segment| match segment {
                Segment::Literal(text) => text.clone(),
                Segment::Slot(i) => slot(&self.slots[*i]),
            })
            .collect()
    }

    /// Substitutes every slot. Fills are trimmed and validated against their
    /// slot's kind.
    pub fn fill(
        &self,
        binding: &SlotBinding,
        resolver: Option<&dyn EntityResolver>,
    ) -> Result<String, TemplateError> {
        if let Some((name, _)) = binding.iter().find(|(name, _)| self.slot(name).is_none()) {
            return Err(TemplateError::UnknownSlot(name.to_string()));
        }
        let mut out = String::with_capacity(self.raw.len());
        for segment in &self.segments {
            match segment {
                Segment::Literal(text) => out.push_str(text),
                Segment::Slot(i) => {
                    let spec = &self.slots[*i];
                    let value = binding
                        .get(&spec.name)
                        .ok_or_else(|| TemplateError::MissingBinding(spec.name.clone()))?
                        .trim();
                    spec.validate(value, resolver)?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }

    /// Recovers a binding that fills this template into `utterance` (up to
    /// normalization). Among several candidates the leftmost-shortest fills win.
    pub fn match_utterance(
        &self,
        utterance: &str,
        resolver: Option<&dyn EntityResolver>,
    ) -> Option<SlotBinding> {
        let utterance = normalize(utterance);
        let u = utterance.as_str();
        let first = &self.pattern[0];
        if self.slots.is_empty() {
            return (u == first).then(SlotBinding::new);
        }
        if !u.starts_with(first.as_str()) {
            return None;
        }
        let mut spans = Vec::with_capacity(self.slots.len());
        let mut found = None;
        self.search(u, first.len(), &mut spans, &mut |spans| {
            let binding = match self.binding_from_spans(u, spans, resolver) {
                Some(b) => b,
                None => return false,
            };
            match self.fill(&binding, resolver) {
                Ok(text) if normalize(&text) == u => {
                    found = Some(binding);
                    true
                }
                _ => false,
            }
        });
        found
    }

    /// Depth-first over fill end positions, shortest first. `accept` returns
    /// true to stop the search.
    fn search(
        &self,
        u: &str,
        pos: usize,
        spans: &mut Vec<Span>,
        accept: &mut dyn FnMut(&[Span]) -> bool,
    ) -> bool {
        let slot = spans.len();
        let next = &self.pattern[slot + 1];
        if slot + 1 == self.slots.len() {
            if u.len() < pos + next.len() + 1 || !u.ends_with(next.as_str()) {
                return false;
            }
            spans.push((pos, u.len() - next.len()));
            let done = accept(spans);
            spans.pop();
            return done;
        }
        let mut from = pos + u[pos..].chars().next().map_or(1, char::len_utf8);
        while from <= u.len() {
            let Some(rel) = u[from..].find(next.as_str()) else {
                return false;
            };
            let end = from + rel;
            spans.push((pos, end));
            if self.search(u, end + next.len(), spans, accept) {
                return true;
            }
            spans.pop();
            from = end + u[end..].chars().next().map_or(1, char::len_utf8);
        }
        false
    }

    fn binding_from_spans(
        &self,
        u: &str,
        spans: &[(usize, usize)],
        resolver: Option<&dyn EntityResolver>,
    ) -> Option<SlotBinding> {
        let mut binding = SlotBinding::new();
        for (spec, &(start, end)) in self.slots.iter().zip(spans) {
            let fill = &u[start..end];
            if fill.is_empty() || fill.trim() != fill {
                return None;
            }
            let value = match (spec.kind, resolver) {
                (SlotKind::EntityId, Some(r)) => r.canonical(fill)?,
                _ => fill,
            };
            binding.insert(spec.name.clone(), value);
        }
        Some(binding)
    }
}

impl fmt::Display for MessageTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl FromStr for MessageTemplate {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MessageTemplate::parse(s)
    }
}

impl Serialize for MessageTemplate {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for MessageTemplate {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        MessageTemplate::parse(&raw).map_err(serde::de::Error::custom)
    }
}

fn parse_marker(body: &str) -> Result<SlotSpec, MarkerProblem> {
    let (name, kind) = body.split_once(':').ok_or(MarkerProblem::Unbalanced)?;
    let mut chars = name.chars();
    let valid_name = chars.next().is_some_and(|c| c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_');
    if !valid_name {
        return Err(MarkerProblem::InvalidName(name.to_string()));
    }
    Ok(SlotSpec::new(name, kind.parse()?))
}

/// Canonical comparison form: lowercased, whitespace runs collapsed, trimmed,
/// with a trailing odd-length run of `.`/`!`/`?` shortened by one.
///
/// Even-length runs are kept, so `"Hmmm..."` becomes `"hmmm.."` and stays there.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.push(lowercase(c));
    }
    loop {
        let run = out.chars().rev().take_while(|c| TERMINAL_PUNCTUATION.contains(c)).count();
        if run % 2 == 0 {
            break;
        }
        out.pop();
        let trimmed = out.trim_end().len();
        out.truncate(trimmed);
    }
    out
}

/// Single-character lowercase mapping; characters that lowercase to several
/// characters are left alone so normalization never grows a message.
fn lowercase(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(raw: &str) -> MessageTemplate {
        MessageTemplate::parse(raw).unwrap()
    }

    fn problem(raw: &str) -> MarkerProblem {
        match MessageTemplate::parse(raw) {
            Err(TemplateError::MalformedSlotMarker { problem, .. }) => problem,
            other => panic!("expected malformed marker for {raw:?}, got {other:?}"),
        }
    }

    #[test]
    fn parses_free_text_slot() {
        let tpl = t("I see {OBJ:FREE_TEXT}.");
        assert_eq!(
            tpl.segments(),
            &[Segment::Literal("I see ".into()), Segment::Slot(0), Segment::Literal(".".into())]
        );
        assert_eq!(tpl.slots()[0].name, "OBJ");
        assert_eq!(tpl.slots()[0].kind, SlotKind::FreeText);
        assert_eq!(tpl.render(), "I see {OBJ:FREE_TEXT}.");
    }

    #[test]
    fn parses_literal_and_distance() {
        let done = t("done");
        assert!(done.is_literal());
        assert_eq!(done.segments(), &[Segment::Literal("done".into())]);

        let fwd = t("move forward {D:DISTANCE}");
        assert_eq!(fwd.segments().len(), 2);
        assert_eq!(fwd.slots()[0].kind, SlotKind::Distance);
    }

    #[test]
    fn rejects_malformed_markers() {
        assert_eq!(problem("I see {OBJ:FREE_TEXT."), MarkerProblem::Unbalanced);
        assert_eq!(problem("I see OBJ}"), MarkerProblem::Unbalanced);
        assert_eq!(problem("a {A:{B:NUMBER}}"), MarkerProblem::Unbalanced);
        assert_eq!(problem("a {OBJ}"), MarkerProblem::Unbalanced);
        assert_eq!(problem("a {OBJ:COLOR}"), MarkerProblem::UnknownKind("COLOR".into()));
        assert_eq!(problem("a {obj:NUMBER}"), MarkerProblem::InvalidName("obj".into()));
        assert_eq!(problem("a {X:NUMBER} b {X:NUMBER}"), MarkerProblem::DuplicateName("X".into()));
        assert_eq!(problem("go {A:NUMBER}{B:NUMBER}"), MarkerProblem::AdjacentSlots);
        assert_eq!(problem("{A:FREE_TEXT}?"), MarkerProblem::NoLiteralContext);
        assert_eq!(MessageTemplate::parse("  "), Err(TemplateError::Empty));
    }

    #[test]
    fn fill_examples() {
        let see = t("I see {OBJ:FREE_TEXT}.");
        let b = SlotBinding::new().with("OBJ", "a door on the left");
        assert_eq!(see.fill(&b, None).unwrap(), "I see a door on the left.");

        assert_eq!(t("done").fill(&SlotBinding::new(), None).unwrap(), "done");

        // independent oracle: concatenate literal segments around the fill
        let fwd = t("move forward {D:DISTANCE}");
        let fill = "7 feet";
        let expected: String = ["move forward ", fill].concat();
        let b = SlotBinding::new().with("D", fill);
        assert_eq!(fwd.fill(&b, None).unwrap(), expected);
    }

    #[test]
    fn fill_errors() {
        let fwd = t("move forward {D:DISTANCE}");
        assert_eq!(fwd.fill(&SlotBinding::new(), None), Err(TemplateError::MissingBinding("D".into())));
        for bad in ["quickly", "7", "7 parsecs", "-3 feet", "1e3 feet", ""] {
            let b = SlotBinding::new().with("D", bad);
            assert!(
                matches!(fwd.fill(&b, None), Err(TemplateError::ConstraintViolation { .. })),
                "{bad:?} should be rejected"
            );
        }
        let b = SlotBinding::new().with("D", "3 feet").with("X", "1");
        assert_eq!(fwd.fill(&b, None), Err(TemplateError::UnknownSlot("X".into())));
    }

    #[test]
    fn numeric_constraints() {
        let mut turn = t("turn left {A:ANGLE}");
        turn.slot_mut("A").unwrap().range = Some(0.0..=360.0);
        let ok = SlotBinding::new().with("A", "90 degrees");
        assert_eq!(turn.fill(&ok, None).unwrap(), "turn left 90 degrees");
        let far = SlotBinding::new().with("A", "400 degrees");
        assert!(turn.fill(&far, None).is_err());
        let wrong_unit = SlotBinding::new().with("A", "200 feet");
        assert!(turn.fill(&wrong_unit, None).is_err());

        let n = t("send {N:NUMBER} pictures");
        assert!(n.fill(&SlotBinding::new().with("N", "2.5"), None).is_ok());
        assert!(n.fill(&SlotBinding::new().with("N", "two"), None).is_err());
    }

    #[test]
    fn match_examples() {
        let see = t("I see {OBJ:FREE_TEXT}.");
        assert_eq!(
            see.match_utterance("i see a wall.", None),
            Some(SlotBinding::new().with("OBJ", "a wall"))
        );
        assert_eq!(see.match_utterance("turn left", None), None);
        assert_eq!(t("done").match_utterance("done", None), Some(SlotBinding::new()));
    }

    #[test]
    fn match_respects_slot_kind() {
        let turn = t("rotate left {A:ANGLE}");
        assert_eq!(turn.match_utterance("rotate left 200 feet", None), None);
        assert_eq!(
            turn.match_utterance("Rotate left 45 degrees", None),
            Some(SlotBinding::new().with("A", "45 degrees"))
        );
    }

    #[test]
    fn match_prefers_leftmost_shortest() {
        let tpl = t("{A:FREE_TEXT} and {B:FREE_TEXT}");
        let b = tpl.match_utterance("x and y and z", None).unwrap();
        assert_eq!(b.get("A"), Some("x"));
        assert_eq!(b.get("B"), Some("y and z"));
    }

    #[test]
    fn hover_form_uses_slot_names() {
        assert_eq!(t("I see {OBJ:FREE_TEXT}.").display_text(), "I see OBJ.");
        assert_eq!(t("done").display_text(), "done");
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("Done."), "done");
        assert_eq!(normalize("  Move   forward 3 feet "), "move forward 3 feet");
        let once = normalize("Hmmm...");
        assert_eq!(once, "hmmm..");
        assert_eq!(normalize(&once), once);
        assert_eq!(normalize("what?"), "what");
        assert_eq!(normalize("a . ."), "a");
        assert_eq!(normalize(""), "");
    }

    struct Ids(Vec<&'static str>);

    impl EntityResolver for Ids {
        fn contains(&self, id: &str) -> bool {
            self.0.contains(&id)
        }
        fn canonical(&self, normalized: &str) -> Option<&str> {
            self.0.iter().copied().find(|id| normalize(id) == normalized)
        }
    }

    #[test]
    fn entity_slots_resolve() {
        let ids = Ids(vec!["Kitchen Door", "Conference Room Right Chair 1"]);
        let tpl = t("move to {TARGET:ENTITY_ID}");
        let ok = SlotBinding::new().with("TARGET", "Kitchen Door");
        assert_eq!(tpl.fill(&ok, Some(&ids)).unwrap(), "move to Kitchen Door");
        let lower = SlotBinding::new().with("TARGET", "kitchen door");
        assert!(tpl.fill(&lower, Some(&ids)).is_err());
        assert_eq!(tpl.match_utterance("move to kitchen door", Some(&ids)), Some(ok));
        assert_eq!(tpl.match_utterance("move to pantry", Some(&ids)), None);
    }
}
