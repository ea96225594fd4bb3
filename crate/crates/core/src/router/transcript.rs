//! Append-only, line-delimited transcript log: one JSON event per line.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::DialogueEvent;

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One event as a single line, without the trailing newline.
pub fn encode_event(event: &DialogueEvent) -> String {
    serde_json::to_string(event).expect("dialogue events serialize")
}

pub fn decode_event(line: &str) -> Result<DialogueEvent, serde_json::Error> {
    serde_json::from_str(line)
}

pub fn encode_transcript(events: &[DialogueEvent]) -> String {
    let mut out = String::new();
    for event in events {
        out.push_str(&encode_event(event));
        out.push('\n');
    }
    out
}

/// Parses a whole log. Blank lines are skipped.
pub fn decode_transcript(text: &str) -> Result<Vec<DialogueEvent>, TranscriptError> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            decode_event(line).map_err(|e| TranscriptError::Parse { line: i + 1, message: e.to_string() })
        })
        .collect()
}

pub fn read_transcript(path: impl AsRef<Path>) -> Result<Vec<DialogueEvent>, TranscriptError> {
    let path = path.as_ref();
    let io_err = |source| TranscriptError::Io { path: path.display().to_string(), source };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(
            decode_event(&line)
                .map_err(|e| TranscriptError::Parse { line: i + 1, message: e.to_string() })?,
        );
    }
    Ok(events)
}

/// Appends events to a log file, flushing after each one.
#[derive(Debug)]
pub struct TranscriptWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl TranscriptWriter {
    pub fn append_to(path: impl Into<PathBuf>) -> io::Result<Self> {
        let path = path.into();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(TranscriptWriter { path, out: BufWriter::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &DialogueEvent) -> io::Result<()> {
        self.out.write_all(encode_event(event).as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}
