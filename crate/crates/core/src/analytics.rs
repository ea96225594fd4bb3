//! Corpus statistics: message frequency, inventory coverage and
//! completion-feedback pacing.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inventory::{MessageFunction, Registry, COMPLETION_TEXTS};
use crate::router::{DialogueEvent, Role};
use crate::template::{normalize, EntityResolver};

/// Default token-Jaccard threshold for a similarity-based partial match.
pub const DEFAULT_PARTIAL_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("line {line}: count must be a positive integer, got {value:?}")]
    InvalidCount { line: usize, value: String },
    #[error("baseline has no completion feedback to compare against")]
    DivisionByZeroGuard,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

// --- corpus ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub text: String,
    pub count: u64,
}

/// Messages in file order, each with a multiplicity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub provenance: String,
    entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn new(provenance: impl Into<String>) -> Self {
        Corpus { provenance: provenance.into(), entries: Vec::new() }
    }

    /// One entry per message, each counted once.
    pub fn from_messages<I, S>(provenance: impl Into<String>, messages: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut corpus = Corpus::new(provenance);
        for m in messages {
            corpus.push(m, 1);
        }
        corpus
    }

    /// Adds `count` occurrences of `text`. A zero count adds nothing.
    pub fn push(&mut self, text: impl Into<String>, count: u64) {
        if count > 0 {
            self.entries.push(CorpusEntry { text: text.into(), count });
        }
    }

    /// Parses `count<TAB>text` lines and plain lines (count 1). Blank lines
    /// are skipped. A line whose text before the first tab is not a number is
    /// a plain line.
    pub fn parse(text: &str, provenance: impl Into<String>) -> Result<Self, AnalyticsError> {
        let mut corpus = Corpus::new(provenance);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match line.split_once('\t') {
                Some((n, msg)) if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) => {
                    let count =
                        n.parse::<u64>().ok().filter(|&c| c > 0).ok_or_else(|| {
                            AnalyticsError::InvalidCount { line: i + 1, value: n.to_string() }
                        })?;
                    corpus.push(msg, count);
                }
                _ => corpus.push(line, 1),
            }
        }
        Ok(corpus)
    }

    pub fn load_path(path: impl AsRef<Path>) -> Result<Self, AnalyticsError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| AnalyticsError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text, path.display().to_string())
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    /// Number of messages once every entry is expanded by its count.
    pub fn expanded_len(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

// --- frequency -------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageCount {
    pub text: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub total: u64,
    pub unique: usize,
    pub repeated_total: u64,
    pub repeated_unique: usize,
    pub repeated_fraction: f64,
    /// Normalized messages seen at least twice, most frequent first.
    pub repeated: Vec<MessageCount>,
    /// Normalized messages seen exactly once, in corpus order.
    pub singletons: Vec<String>,
}

pub fn frequency(corpus: &Corpus) -> Result<FrequencyReport, AnalyticsError> {
    if corpus.is_empty() {
        return Err(AnalyticsError::EmptyCorpus);
    }
    let mut counts: IndexMap<String, u64> = IndexMap::new();
    for entry in corpus.entries() {
        *counts.entry(normalize(&entry.text)).or_default() += entry.count;
    }
    let total = corpus.expanded_len();
    let mut repeated: Vec<MessageCount> = counts
        .iter()
        .filter(|(_, &c)| c >= 2)
        .map(|(t, &c)| MessageCount { text: t.clone(), count: c })
        .collect();
    // Most frequent first; ties by text so the report is order-independent.
    repeated.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.text.cmp(&b.text)));
    let repeated_total: u64 = repeated.iter().map(|m| m.count).sum();
    let singletons = counts.iter().filter(|(_, &c)| c == 1).map(|(t, _)| t.clone()).collect();
    Ok(FrequencyReport {
        total,
        unique: counts.len(),
        repeated_total,
        repeated_unique: repeated.len(),
        repeated_fraction: repeated_total as f64 / total as f64,
        repeated,
        singletons,
    })
}

// --- coverage --------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CoverageClass {
    Exact,
    Partial,
    None,
}

impl CoverageClass {
    pub fn as_str(self) -> &'static str {
        match self {
            CoverageClass::Exact => "EXACT",
            CoverageClass::Partial => "PARTIAL",
            CoverageClass::None => "NONE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedMessage {
    pub text: String,
    pub count: u64,
    pub class: CoverageClass,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub button_id: Option<String>,
    /// Token-Jaccard score, present only for similarity-based partials.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub total: u64,
    pub exact: u64,
    pub partial: u64,
    pub none: u64,
    pub partial_threshold: f64,
    pub messages: Vec<ClassifiedMessage>,
}

impl CoverageReport {
    /// Percentage of the expanded corpus, rounded to one decimal place.
    pub fn percent(&self, class: CoverageClass) -> f64 {
        let n = match class {
            CoverageClass::Exact => self.exact,
            CoverageClass::Partial => self.partial,
            CoverageClass::None => self.none,
        };
        if self.total == 0 {
            return 0.0;
        }
        (n as f64 * 1000.0 / self.total as f64).round() / 10.0
    }
}

#[derive(Clone, Copy)]
pub struct CoverageOptions<'a> {
    pub partial_threshold: f64,
    /// Checks ENTITY_ID fills when matching slotted buttons.
    pub entities: Option<&'a (dyn EntityResolver + Sync)>,
}

impl Default for CoverageOptions<'_> {
    fn default() -> Self {
        CoverageOptions { partial_threshold: DEFAULT_PARTIAL_THRESHOLD, entities: None }
    }
}

pub fn coverage(corpus: &Corpus, registry: &Registry) -> CoverageReport {
    coverage_with(corpus, registry, CoverageOptions::default())
}

/// Classifies every corpus entry, first match wins: EXACT if its normalized
/// text equals a slotless button's, PARTIAL if a slotted template matches it
/// or its tokens overlap a slotless button's by at least the threshold, and
/// NONE otherwise.
pub fn coverage_with(corpus: &Corpus, registry: &Registry, options: CoverageOptions<'_>) -> CoverageReport {
    let index = CoverageIndex::new(registry);
    let messages: Vec<ClassifiedMessage> =
        corpus.entries().par_iter().map(|entry| index.classify(entry, &options)).collect();
    let mut report = CoverageReport {
        total: 0,
        exact: 0,
        partial: 0,
        none: 0,
        partial_threshold: options.partial_threshold,
        messages: Vec::new(),
    };
    for m in &messages {
        report.total += m.count;
        match m.class {
            CoverageClass::Exact => report.exact += m.count,
            CoverageClass::Partial => report.partial += m.count,
            CoverageClass::None => report.none += m.count,
        }
    }
    report.messages = messages;
    report
}

struct CoverageIndex<'r> {
    registry: &'r Registry,
    exact: HashMap<String, &'r str>,
    literal_tokens: Vec<(&'r str, HashSet<String>)>,
}

impl<'r> CoverageIndex<'r> {
    fn new(registry: &'r Registry) -> Self {
        let mut exact = HashMap::new();
        let mut literal_tokens = Vec::new();
        for button in registry.buttons().filter(|b| b.template.is_literal()) {
            let text = normalize(&button.template.render());
            literal_tokens.push((button.id.as_str(), tokens(&text)));
            exact.entry(text).or_insert(button.id.as_str());
        }
        CoverageIndex { registry, exact, literal_tokens }
    }

    fn classify(&self, entry: &CorpusEntry, options: &CoverageOptions<'_>) -> ClassifiedMessage {
        let text = normalize(&entry.text);
        let result = |class, button_id: Option<&str>, similarity| ClassifiedMessage {
            text: entry.text.clone(),
            count: entry.count,
            class,
            button_id: button_id.map(str::to_string),
            similarity,
        };
        if let Some(id) = self.exact.get(&text) {
            return result(CoverageClass::Exact, Some(id), None);
        }
        let resolver = options.entities.map(|e| e as &dyn EntityResolver);
        let slotted = self
            .registry
            .buttons()
            .filter(|b| !b.template.is_literal())
            .find(|b| b.template.match_utterance(&text, resolver).is_some());
        if let Some(button) = slotted {
            return result(CoverageClass::Partial, Some(&button.id), None);
        }
        let mine = tokens(&text);
        let mut best: Option<(&str, f64)> = None;
        for (id, theirs) in &self.literal_tokens {
            let j = jaccard(&mine, theirs);
            if j >= options.partial_threshold && best.is_none_or(|(_, b)| j > b) {
                best = Some((id, j));
            }
        }
        match best {
            Some((id, j)) => result(CoverageClass::Partial, Some(id), Some(j)),
            None => result(CoverageClass::None, None, None),
        }
    }
}

/// Whitespace tokens of normalized text with punctuation trimmed from their
/// edges; tokens that are all punctuation vanish.
pub fn tokens(normalized: &str) -> HashSet<String> {
    normalized
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// |a ∩ b| / |a ∪ b|, zero when both are empty.
pub fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

// --- pacing ----------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacingBreakdown {
    pub done: u64,
    pub sent: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacingReport {
    pub completion_count: u64,
    pub breakdown: PacingBreakdown,
}

impl PacingReport {
    pub fn new(done: u64, sent: u64) -> Self {
        PacingReport { completion_count: done + sent, breakdown: PacingBreakdown { done, sent } }
    }
}

/// Counts completion feedback sent by the DM to the participant: messages
/// reading "done" or "sent" once normalized, or tagged COMPLETION. Anything
/// other than "sent" is tallied as done.
pub fn pacing<'a>(events: impl IntoIterator<Item = &'a DialogueEvent>) -> PacingReport {
    let mut done = 0;
    let mut sent = 0;
    for event in events {
        if event.sender != Role::DmWizard || event.recipient != Role::Participant {
            continue;
        }
        let text = normalize(&event.text);
        let is_text = COMPLETION_TEXTS.contains(&text.as_str());
        if !is_text && event.function != Some(MessageFunction::Completion) {
            continue;
        }
        if text == "sent" {
            sent += 1;
        } else {
            done += 1;
        }
    }
    PacingReport::new(done, sent)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacingComparison {
    pub baseline: u64,
    pub other: u64,
    pub delta: i64,
    pub ratio: f64,
}

/// How `b` compares with the baseline `a`: `b − a` and `b / a`.
pub fn compare_pacing(a: &PacingReport, b: &PacingReport) -> Result<PacingComparison, AnalyticsError> {
    if a.completion_count == 0 {
        return Err(AnalyticsError::DivisionByZeroGuard);
    }
    Ok(PacingComparison {
        baseline: a.completion_count,
        other: b.completion_count,
        delta: b.completion_count as i64 - a.completion_count as i64,
        ratio: b.completion_count as f64 / a.completion_count as f64,
    })
}

// --- text rendering --------------------------------------------------------

impl fmt::Display for FrequencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "total: {}", self.total)?;
        writeln!(f, "unique: {}", self.unique)?;
        writeln!(f, "repeated_total: {}", self.repeated_total)?;
        writeln!(f, "repeated_unique: {}", self.repeated_unique)?;
        writeln!(
            f,
            "repeated_fraction: {:.4} ({:.1}%)",
            self.repeated_fraction,
            self.repeated_fraction * 100.0
        )?;
        writeln!(f, "repeated:")?;
        for m in &self.repeated {
            writeln!(f, "  {}\t{}", m.count, m.text)?;
        }
        writeln!(f, "singletons: {}", self.singletons.len())?;
        for s in &self.singletons {
            writeln!(f, "  {s}")?;
        }
        Ok(())
    }
}

impl fmt::Display for CoverageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "total: {}", self.total)?;
        for class in [CoverageClass::Exact, CoverageClass::Partial, CoverageClass::None] {
            let n = match class {
                CoverageClass::Exact => self.exact,
                CoverageClass::Partial => self.partial,
                CoverageClass::None => self.none,
            };
            writeln!(f, "{}: {} ({:.1}%)", class.as_str().to_lowercase(), n, self.percent(class))?;
        }
        writeln!(f, "partial_threshold: {}", self.partial_threshold)?;
        writeln!(f, "messages:")?;
        for m in &self.messages {
            write!(f, "  {}\t{}\t{}", m.class.as_str(), m.count, m.text)?;
            if let Some(id) = &m.button_id {
                write!(f, "\t{id}")?;
            }
            if let Some(s) = m.similarity {
                write!(f, "\t{s:.3}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl fmt::Display for PacingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "completion_count: {}", self.completion_count)?;
        writeln!(f, "done: {}", self.breakdown.done)?;
        writeln!(f, "sent: {}", self.breakdown.sent)
    }
}

impl fmt::Display for PacingComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "baseline: {}", self.baseline)?;
        writeln!(f, "other: {}", self.other)?;
        writeln!(f, "delta: {}", self.delta)?;
        writeln!(f, "ratio: {:.3}", self.ratio)
    }
}
